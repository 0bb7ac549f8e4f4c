//! CSV, JSON and gnuplot writers. Data files carry no timestamps so that
//! identical configs give byte-identical output; `metadata.json` is the one
//! exception.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::json;

use crate::CliError;

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io { path: path.display().to_string(), message: e.to_string() }
}

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub struct OutputDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(root).map_err(|e| io_err(root, e))?;
        Ok(OutputDir { root: root.to_path_buf(), written: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), CliError> {
        let path = self.path(name);
        let mut w = csv::Writer::from_path(&path).map_err(|e| io_err(&path, e))?;
        w.write_record(header).map_err(|e| io_err(&path, e))?;
        for row in rows {
            w.write_record(&row).map_err(|e| io_err(&path, e))?;
        }
        w.flush().map_err(|e| io_err(&path, e))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn text(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        let path = self.path(name);
        std::fs::write(&path, body).map_err(|e| io_err(&path, e))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let body = serde_json::to_string_pretty(value).map_err(|e| io_err(&self.path(name), e))?;
        self.text(name, &(body + "\n"))
    }

    /// Writes `metadata.json`: command, version, config, extra fields and
    /// the creation time.
    pub fn metadata(&mut self, command: &str, config: Option<&serde_json::Value>, extra: serde_json::Value) -> Result<(), CliError> {
        let created = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let files = self.written.clone();
        let meta = json!({
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "created_unix": created,
            "config": config,
            "files": files,
            "details": extra,
        });
        self.json("metadata.json", &meta)
    }
}

pub fn fig1_script(files: &[(f64, String)]) -> String {
    let mut s = String::from(
        "# f, Γ₁(t) and Γ₂ at each snapshot time\n\
         set datafile separator ','\n\
         set terminal pngcairo size 1600,800\n\
         set output 'fig1.png'\n\
         set multiplot layout 2,4\n\
         set xlabel 'x'\n\
         set key top left\n",
    );
    for (t, name) in files {
        s.push_str(&format!(
            "set title 't = {t}'\n\
             plot '{name}' using 1:2 with lines lw 2 title 'f', \\\n\
             \x20    '' using 1:3 with lines dt 2 title 'Γ₁', \\\n\
             \x20    '' using 1:4 with lines dt 3 title 'Γ₂'\n"
        ));
    }
    s.push_str("unset multiplot\n");
    s
}

pub fn fig2_script(csv_name: &str) -> String {
    format!(
        "# L¹ distance to Γ₁(t) (red), Γ₂ (black) and λψ (blue)\n\
         set datafile separator ','\n\
         set terminal pngcairo size 900,600\n\
         set output 'fig2.png'\n\
         set logscale xy\n\
         set format y '10^{{%L}}'\n\
         set xlabel 't'\n\
         set ylabel 'L¹ error'\n\
         set key bottom left\n\
         plot '{csv_name}' using 1:2 with lines lw 2 lc rgb 'red' title 'Γ₁', \\\n\
         \x20    '' using 1:3 with lines lw 2 lc rgb 'black' title 'Γ₂', \\\n\
         \x20    '' using 1:4 with lines dt 2 lc rgb 'blue' title 'λψ'\n"
    )
}

pub fn regimes_script(csv_name: &str) -> String {
    format!(
        "# winning profile per (ε, t); analytic boundaries t = ε^(-2/3) and t = ε^(-4)\n\
         set datafile separator ','\n\
         set terminal pngcairo size 900,600\n\
         set output 'regimes.png'\n\
         set logscale xy\n\
         set xlabel 'ε'\n\
         set ylabel 't'\n\
         set cbrange [0:2]\n\
         set palette defined (0 'red', 1 'black', 2 'grey')\n\
         set cbtics ('gaussian' 0, 'cauchy' 1, 'neither' 2)\n\
         code(s) = s eq 'gaussian' ? 0 : (s eq 'cauchy' ? 1 : 2)\n\
         plot '{csv_name}' using 1:2:(code(strcol(3))) every ::1 with points pt 5 ps 3 palette notitle, \\\n\
         \x20    x**(-2./3) with lines dt 2 lc rgb 'red' title 't = ε^{{-2/3}}', \\\n\
         \x20    x**(-4) with lines dt 2 lc rgb 'black' title 't = ε^{{-4}}'\n"
    )
}
