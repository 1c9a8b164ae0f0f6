//! key=value configuration files. Unknown or duplicated keys are rejected
//! with the offending field named, so typos fail loudly instead of silently
//! running defaults.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProblemName {
    Transport,
    Custom,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RecipeMode {
    Linear,
    Doubling,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveMode {
    /// Anchored (P, Q, R) system from P(0) = M.
    Seed,
    /// Plain Riccati flow from the terminal matrix.
    Direct,
}

#[derive(Clone, Debug)]
pub struct Config {
    pub problem_name: ProblemName,
    pub grid_n: usize,
    pub grid_length: f64,
    pub anchor_m: f64,
    pub rtol: f64,
    pub atol: f64,
    pub checkpoints: usize,
    pub escape_ceiling: f64,
    pub pinv_rel_tol: f64,
    pub recipe_t: f64,
    pub recipe_kappa: usize,
    pub recipe_mode: RecipeMode,
    pub solve_mode: SolveMode,
    pub solve_t: f64,
    pub mtilde_count: usize,
    pub mtilde_file: Option<PathBuf>,
    pub custom_a: Option<PathBuf>,
    pub custom_sigma: Option<PathBuf>,
    pub custom_c: Option<PathBuf>,
    pub custom_m: Option<PathBuf>,
    pub custom_weight: f64,
    pub probe_trials: usize,
    pub probe_segments: usize,
    pub probe_amplitude: f64,
    pub verify_t: f64,
    pub horizon_sample_t: f64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            problem_name: ProblemName::Transport,
            grid_n: 32,
            grid_length: 2.0,
            anchor_m: -0.1,
            rtol: 1e-10,
            atol: 1e-12,
            checkpoints: 128,
            escape_ceiling: 1e6,
            pinv_rel_tol: 1e-10,
            recipe_t: 0.4,
            recipe_kappa: 8,
            recipe_mode: RecipeMode::Linear,
            solve_mode: SolveMode::Seed,
            solve_t: 0.5,
            mtilde_count: 5,
            mtilde_file: None,
            custom_a: None,
            custom_sigma: None,
            custom_c: None,
            custom_m: None,
            custom_weight: 1.0,
            probe_trials: 100,
            probe_segments: 16,
            probe_amplitude: 0.5,
            verify_t: 0.3,
            horizon_sample_t: 0.5,
        }
    }
}

fn parse_f64(key: &str, raw: &str) -> Result<f64, String> {
    raw.parse::<f64>().map_err(|_| format!("config: {key}: invalid number `{raw}`"))
}

fn parse_usize(key: &str, raw: &str) -> Result<usize, String> {
    raw.parse::<usize>().map_err(|_| format!("config: {key}: invalid integer `{raw}`"))
}

impl Config {
    pub fn load(path: &Path) -> Result<Config, String> {
        let text = fs::read_to_string(path)
            .map_err(|e| format!("config: cannot read {}: {e}", path.display()))?;
        // Relative paths inside the file resolve against the file's directory.
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Config::parse(&text, &base)
    }

    pub fn parse(text: &str, base: &Path) -> Result<Config, String> {
        let mut pairs: BTreeMap<&str, &str> = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("config: line {}: expected key=value", lineno + 1))?;
            let (key, value) = (key.trim(), value.trim());
            if pairs.insert(key, value).is_some() {
                return Err(format!("config: duplicate key `{key}`"));
            }
        }

        let mut cfg = Config::default();
        let path_of = |raw: &str| -> PathBuf {
            let p = PathBuf::from(raw);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };
        for (key, raw) in pairs {
            match key {
                "problem.name" => {
                    cfg.problem_name = match raw {
                        "transport" => ProblemName::Transport,
                        "custom" => ProblemName::Custom,
                        other => {
                            return Err(format!(
                                "config: problem.name: expected transport|custom, got `{other}`"
                            ))
                        }
                    }
                }
                "grid.n" => cfg.grid_n = parse_usize(key, raw)?,
                "grid.length" => cfg.grid_length = parse_f64(key, raw)?,
                "anchor.m" => cfg.anchor_m = parse_f64(key, raw)?,
                "riccati.rtol" => cfg.rtol = parse_f64(key, raw)?,
                "riccati.atol" => cfg.atol = parse_f64(key, raw)?,
                "riccati.checkpoints" => cfg.checkpoints = parse_usize(key, raw)?,
                "escape.ceiling" => cfg.escape_ceiling = parse_f64(key, raw)?,
                "pinv.rel_tol" => cfg.pinv_rel_tol = parse_f64(key, raw)?,
                "recipe.t" => cfg.recipe_t = parse_f64(key, raw)?,
                "recipe.kappa" => cfg.recipe_kappa = parse_usize(key, raw)?,
                "recipe.mode" => {
                    cfg.recipe_mode = match raw {
                        "linear" => RecipeMode::Linear,
                        "doubling" => RecipeMode::Doubling,
                        other => {
                            return Err(format!(
                                "config: recipe.mode: expected linear|doubling, got `{other}`"
                            ))
                        }
                    }
                }
                "solve.mode" => {
                    cfg.solve_mode = match raw {
                        "seed" => SolveMode::Seed,
                        "direct" => SolveMode::Direct,
                        other => {
                            return Err(format!(
                                "config: solve.mode: expected seed|direct, got `{other}`"
                            ))
                        }
                    }
                }
                "solve.t" => cfg.solve_t = parse_f64(key, raw)?,
                "mtilde.count" => cfg.mtilde_count = parse_usize(key, raw)?,
                "mtilde.file" => cfg.mtilde_file = Some(path_of(raw)),
                "custom.a" => cfg.custom_a = Some(path_of(raw)),
                "custom.sigma" => cfg.custom_sigma = Some(path_of(raw)),
                "custom.c" => cfg.custom_c = Some(path_of(raw)),
                "custom.m" => cfg.custom_m = Some(path_of(raw)),
                "custom.weight" => cfg.custom_weight = parse_f64(key, raw)?,
                "probe.trials" => cfg.probe_trials = parse_usize(key, raw)?,
                "probe.segments" => cfg.probe_segments = parse_usize(key, raw)?,
                "probe.amplitude" => cfg.probe_amplitude = parse_f64(key, raw)?,
                "verify.t" => cfg.verify_t = parse_f64(key, raw)?,
                "horizon.sample_t" => cfg.horizon_sample_t = parse_f64(key, raw)?,
                other => return Err(format!("config: unknown key `{other}`")),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), String> {
        if self.anchor_m >= 0.0 {
            return Err(format!("config: anchor.m must be negative, got {}", self.anchor_m));
        }
        if !(self.grid_length.is_finite() && self.grid_length > 0.0) {
            return Err(format!("config: grid.length must be positive, got {}", self.grid_length));
        }
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err("config: riccati.rtol and riccati.atol must be positive".to_owned());
        }
        if self.checkpoints < 2 {
            return Err(format!(
                "config: riccati.checkpoints must be at least 2, got {}",
                self.checkpoints
            ));
        }
        if !(self.escape_ceiling.is_finite() && self.escape_ceiling > 0.0) {
            return Err("config: escape.ceiling must be positive".to_owned());
        }
        if !(self.pinv_rel_tol > 0.0 && self.pinv_rel_tol < 1.0) {
            return Err("config: pinv.rel_tol must lie in (0, 1)".to_owned());
        }
        if !(self.recipe_t.is_finite() && self.recipe_t > 0.0) {
            return Err(format!("config: recipe.t must be positive, got {}", self.recipe_t));
        }
        if self.recipe_kappa == 0 {
            return Err("config: recipe.kappa must be at least 1".to_owned());
        }
        if !(self.solve_t.is_finite() && self.solve_t >= 0.0) {
            return Err(format!("config: solve.t must be nonnegative, got {}", self.solve_t));
        }
        if self.mtilde_count == 0 {
            return Err("config: mtilde.count must be at least 1".to_owned());
        }
        if self.probe_segments == 0 {
            return Err("config: probe.segments must be at least 1".to_owned());
        }
        if !(self.probe_amplitude.is_finite() && self.probe_amplitude > 0.0) {
            return Err("config: probe.amplitude must be positive".to_owned());
        }
        if !(self.verify_t.is_finite() && self.verify_t > 0.0) {
            return Err(format!("config: verify.t must be positive, got {}", self.verify_t));
        }
        if !(self.horizon_sample_t.is_finite() && self.horizon_sample_t > 0.0) {
            return Err("config: horizon.sample_t must be positive".to_owned());
        }
        if self.problem_name == ProblemName::Custom {
            for (key, path) in [
                ("custom.a", &self.custom_a),
                ("custom.sigma", &self.custom_sigma),
                ("custom.c", &self.custom_c),
                ("custom.m", &self.custom_m),
            ] {
                if path.is_none() {
                    return Err(format!("config: problem.name=custom requires {key}"));
                }
            }
            if !(self.custom_weight.is_finite() && self.custom_weight > 0.0) {
                return Err("config: custom.weight must be positive".to_owned());
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Config, String> {
        Config::parse(text, Path::new(""))
    }

    #[test]
    fn empty_config_gives_documented_defaults() {
        let cfg = parse("").unwrap();
        assert_eq!(cfg.problem_name, ProblemName::Transport);
        assert_eq!(cfg.grid_n, 32);
        assert_eq!(cfg.grid_length, 2.0);
        assert_eq!(cfg.anchor_m, -0.1);
        assert_eq!(cfg.rtol, 1e-10);
        assert_eq!(cfg.atol, 1e-12);
        assert_eq!(cfg.pinv_rel_tol, 1e-10);
        assert_eq!(cfg.recipe_mode, RecipeMode::Linear);
    }

    #[test]
    fn comments_blanks_and_values_parse() {
        let cfg = parse(
            "# reference run\n\ngrid.n = 16\nrecipe.t=0.2\nrecipe.mode = doubling\nrecipe.kappa=4\n",
        )
        .unwrap();
        assert_eq!(cfg.grid_n, 16);
        assert_eq!(cfg.recipe_t, 0.2);
        assert_eq!(cfg.recipe_mode, RecipeMode::Doubling);
        assert_eq!(cfg.recipe_kappa, 4);
    }

    #[test]
    fn unknown_duplicate_and_malformed_keys_are_field_errors() {
        let e = parse("grid.m = 3\n").unwrap_err();
        assert!(e.contains("unknown key `grid.m`"), "{e}");
        let e = parse("grid.n=8\ngrid.n=9\n").unwrap_err();
        assert!(e.contains("duplicate key `grid.n`"), "{e}");
        let e = parse("just a line\n").unwrap_err();
        assert!(e.contains("expected key=value"), "{e}");
        let e = parse("grid.n = eight\n").unwrap_err();
        assert!(e.contains("grid.n"), "{e}");
    }

    #[test]
    fn nonnegative_anchor_is_rejected() {
        let e = parse("anchor.m = 0.1\n").unwrap_err();
        assert!(e.contains("anchor.m must be negative"), "{e}");
    }

    #[test]
    fn custom_problem_requires_all_matrix_paths() {
        let e = parse("problem.name = custom\ncustom.a = a.csv\n").unwrap_err();
        assert!(e.contains("requires custom.sigma"), "{e}");
    }

    #[test]
    fn relative_paths_resolve_against_the_config_directory() {
        let cfg = Config::parse("mtilde.file = mt.csv\n", Path::new("/cfgdir")).unwrap();
        assert_eq!(cfg.mtilde_file.unwrap(), PathBuf::from("/cfgdir/mt.csv"));
    }
}
