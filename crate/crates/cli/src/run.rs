use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context};
use harvest_opt::{
    add_noise, classify, exhaustive_search, integrate_rk4, mean_power, optimize, HarvesterObjective, Objective,
    OptimizationResult,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::{Mode, RunConfig};

/// Prints a line to stdout, ignoring a closed pipe.
macro_rules! say {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

/// Config problems exit with 1, everything that fails afterwards with 2.
#[derive(Debug)]
pub enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }

    pub fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Config(e) | Failure::Runtime(e) => e,
        }
    }
}

trait ConfigErr<T> {
    fn config(self) -> Result<T, Failure>;
}

impl<T> ConfigErr<T> for anyhow::Result<T> {
    fn config(self) -> Result<T, Failure> {
        self.map_err(Failure::Config)
    }
}

trait RuntimeErr<T> {
    fn runtime(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> RuntimeErr<T> for Result<T, E> {
    fn runtime(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Runtime(e.into()))
    }
}

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub noise: Option<f64>,
}

pub struct Run {
    pub mode: Mode,
    pub cfg: RunConfig,
    pub seed: u64,
    pub prefix: PathBuf,
}

impl Run {
    pub fn prepare(mode: Mode, config: Option<&Path>, ov: &Overrides) -> Result<Self, Failure> {
        let mut cfg = match config {
            Some(p) => RunConfig::load(p).config()?,
            None => RunConfig::default(),
        };
        if let Some(n) = ov.noise {
            cfg.noise_ratio = Some(n);
        }
        cfg.validate_for(mode).config()?;
        let seed = ov.seed.or(cfg.seed).unwrap_or(0);
        let prefix = ov
            .out
            .clone()
            .or_else(|| cfg.out.as_ref().map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(mode.name()));
        Ok(Self { mode, cfg, seed, prefix })
    }

    fn path(&self, suffix: &str) -> PathBuf {
        let mut name = self.prefix.file_name().map(|s| s.to_os_string()).unwrap_or_default();
        name.push(format!("_{suffix}"));
        self.prefix.with_file_name(name)
    }

    fn create(&self, suffix: &str) -> Result<(PathBuf, BufWriter<File>), Failure> {
        let path = self.path(suffix);
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display())).runtime()?;
        }
        let file = File::create(&path).with_context(|| format!("creating {}", path.display())).runtime()?;
        Ok((path, BufWriter::new(file)))
    }

    fn write_json(&self, value: &Value) -> Result<PathBuf, Failure> {
        let (path, mut w) = self.create("result.json")?;
        serde_json::to_writer_pretty(&mut w, value).runtime()?;
        writeln!(w).runtime()?;
        w.flush().runtime()?;
        Ok(path)
    }

    fn objective(&self) -> Result<HarvesterObjective<f64>, Failure> {
        HarvesterObjective::new(
            self.cfg.design_space().config()?,
            self.cfg.sim().config()?,
            self.cfg.initial().config()?,
            self.cfg.test01().config()?,
            self.cfg.penalty().config()?,
            self.cfg.noise_ratio().config()?,
        )
        .map_err(|e| Failure::Config(e.into()))
    }

    pub fn simulate(&self) -> Result<(), Failure> {
        let start = Instant::now();
        let params = self.cfg.params().config()?;
        let ic = self.cfg.initial().config()?;
        let sim = self.cfg.sim().config()?;
        let test01 = self.cfg.test01().config()?;
        let noise = self.cfg.noise_ratio().config()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);

        let series = integrate_rk4(&params, &ic, &sim).runtime()?;
        let series = if noise > 0.0 { add_noise(&series, noise, &mut rng) } else { series };
        let (t0, tf) = sim.power_window;
        let power = mean_power(&series, t0, tf, params.lambda).runtime()?;
        let observable = series.voltage_window(t0, tf, sim.observable_stride).runtime()?;
        let k = classify(&observable, &test01, &mut rng).runtime()?.k;

        let (series_path, mut w) = self.create("series.csv")?;
        series.write_csv(&mut w).runtime()?;
        w.flush().runtime()?;
        let json_path = self.write_json(&json!({
            "mode": "simulate",
            "seed": self.seed,
            "params": {
                "xi": params.xi, "chi": params.chi, "lambda": params.lambda,
                "kappa": params.kappa, "f": params.f, "omega": params.omega,
            },
            "noise_ratio": noise,
            "power": power,
            "k": k,
            "samples": series.len(),
            "wall_time_s": start.elapsed().as_secs_f64(),
        }))?;
        say!("P = {power:.6e}  K = {k:.4}");
        say!("wrote {} and {}", series_path.display(), json_path.display());
        Ok(())
    }

    pub fn classify(&self, input: &Path, stride: usize) -> Result<(), Failure> {
        if stride == 0 {
            return Err(Failure::Config(anyhow::anyhow!("stride must be at least 1")));
        }
        let test01 = self.cfg.test01().config()?;
        let series = read_series(input).runtime()?;
        let observable: Vec<f64> = series.into_iter().step_by(stride).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let res = classify(&observable, &test01, &mut rng).runtime()?;

        let write = || -> std::io::Result<()> {
            let mut out = std::io::stdout().lock();
            writeln!(out, "# K = {}", res.k)?;
            writeln!(out, "# samples = {}, degenerate = {}", observable.len(), res.degenerate)?;
            writeln!(out, "c,k_c")?;
            for (c, kc) in res.c_values.iter().zip(&res.k_c_values) {
                writeln!(out, "{c:.16e},{kc:.16e}")?;
            }
            Ok(())
        };
        match write() {
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Failure::Runtime(e.into())),
            _ => Ok(()),
        }
    }

    pub fn grid(&self) -> Result<(), Failure> {
        let start = Instant::now();
        let objective = self.objective()?;
        let space = &objective.space;
        let grid = self.cfg.grid(space.dim()).config()?;
        let outcome = exhaustive_search(&objective, space, &grid, self.seed).runtime()?;

        let (field_path, mut w) = self.create("field.csv")?;
        outcome.field.write_csv(&mut w).runtime()?;
        w.flush().runtime()?;
        let mut summary = result_json(self, &outcome.result, objective.evaluations(), start);
        summary["resolution"] = json!(grid.resolution);
        let json_path = self.write_json(&summary)?;
        report(&outcome.result, &space.names());
        say!("wrote {} and {}", field_path.display(), json_path.display());
        Ok(())
    }

    pub fn ce(&self) -> Result<(), Failure> {
        let start = Instant::now();
        let objective = self.objective()?;
        let space = &objective.space;
        let ce = self.cfg.ce(self.seed).config()?;
        let result = optimize(&objective, space, &ce).runtime()?;

        let (trace_path, mut w) = self.create("trace.csv")?;
        result.write_trace_csv(&mut w).runtime()?;
        w.flush().runtime()?;
        let mut summary = result_json(self, &result, objective.evaluations(), start);
        summary["converged"] = json!(result.converged);
        summary["final_mu"] = json!(result.final_mu);
        summary["final_sigma"] = json!(result.final_sigma);
        let json_path = self.write_json(&summary)?;
        report(&result, &space.names());
        say!("wrote {} and {}", trace_path.display(), json_path.display());
        Ok(())
    }
}

fn result_json(run: &Run, r: &OptimizationResult<f64>, evaluations: u64, start: Instant) -> Value {
    let names = run.cfg.design_space().map(|s| s.names()).unwrap_or_default();
    json!({
        "mode": run.mode.name(),
        "seed": run.seed,
        "noise_ratio": run.cfg.noise_ratio.unwrap_or(0.0),
        "variables": names,
        "optimum": r.x_star,
        "value": r.s_star,
        "power": r.power_star,
        "k": r.k_star,
        "feasible": r.feasible,
        "evaluations": evaluations,
        "levels": r.levels_used,
        "wall_time_s": start.elapsed().as_secs_f64(),
    })
}

fn report(r: &OptimizationResult<f64>, names: &[&str]) {
    let at: Vec<String> = names.iter().zip(&r.x_star).map(|(n, v)| format!("{n}={v:.6}")).collect();
    say!(
        "best P = {:.6e}  K = {:.4}  at {}  ({} evaluations, {} levels)",
        r.power_star,
        r.k_star,
        at.join(" "),
        r.evaluations_used,
        r.levels_used
    );
}

/// Reads a scalar series from CSV. A header row is optional; with a header the
/// `v` column is used if present, otherwise the last column.
pub fn read_series(path: &Path) -> anyhow::Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let mut column = None;
    let mut values = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        if record.is_empty() || record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let col = match column {
            Some(c) => c,
            None => {
                let c = record.iter().position(|f| f == "v").unwrap_or(record.len() - 1);
                column = Some(c);
                if record[c].parse::<f64>().is_err() {
                    continue;
                }
                c
            }
        };
        let field = record.get(col).with_context(|| format!("line {} has no column {}", line + 1, col + 1))?;
        let v: f64 = field.parse().with_context(|| format!("line {}: bad number `{field}`", line + 1))?;
        values.push(v);
    }
    if values.is_empty() {
        bail!("{} holds no samples", path.display());
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> PathBuf {
        let p = dir.path().join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn series_formats() {
        let dir = tempfile::tempdir().unwrap();
        let single = write(&dir, "a.csv", "1.0\n2.5\n-3\n");
        assert_eq!(read_series(&single).unwrap(), vec![1.0, 2.5, -3.0]);
        let pair = write(&dir, "b.csv", "t,v\n0,1\n0.1,2\n");
        assert_eq!(read_series(&pair).unwrap(), vec![1.0, 2.0]);
        let wide = write(&dir, "c.csv", "t,x,xdot,v\n0,9,9,4\n1,9,9,5\n");
        assert_eq!(read_series(&wide).unwrap(), vec![4.0, 5.0]);
        let bare_pair = write(&dir, "d.csv", "0,7\n1,8\n");
        assert_eq!(read_series(&bare_pair).unwrap(), vec![7.0, 8.0]);
    }

    #[test]
    fn bad_series_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(read_series(&write(&dir, "e.csv", "")).is_err());
        assert!(read_series(&write(&dir, "f.csv", "1\nabc\n")).is_err());
        assert!(read_series(&dir.path().join("missing.csv")).is_err());
    }

    #[test]
    fn output_paths_append_suffix() {
        let run = Run { mode: Mode::Ce, cfg: RunConfig::default(), seed: 0, prefix: PathBuf::from("out/run1") };
        assert_eq!(run.path("trace.csv"), PathBuf::from("out/run1_trace.csv"));
    }
}
