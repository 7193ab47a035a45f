//! Run configuration: defaults, config-file overlay, flag overrides.
//!
//! The config file is flat `key = value` text with `#` comments. Keys match
//! the long CLI flags with underscores (`nbd_sample_count_threshold = 70`).
//! Precedence is defaults < file < flags.

use msde::meanshift::ShiftConfig;
use msde::pipeline::MsdeConfig;
use msde::weights::WeightConfig;

/// Effective configuration of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub k: usize,
    pub nbd_sample_count_threshold: usize,
    pub learning_rate: f64,
    pub max_iters_shift: usize,
    pub shift_threshold: f64,
    pub max_iters_weight_count: usize,
    pub satisfiability_proportion: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub standardize: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            k: 100,
            nbd_sample_count_threshold: 70,
            learning_rate: 0.1,
            max_iters_shift: 6,
            shift_threshold: 0.003,
            max_iters_weight_count: 4,
            satisfiability_proportion: 0.3,
            batch_size: 4096,
            seed: 0,
            standardize: true,
        }
    }
}

impl RunConfig {
    pub fn to_msde_config(&self) -> MsdeConfig {
        MsdeConfig {
            weights: WeightConfig {
                nbd_sample_count_threshold: self.nbd_sample_count_threshold,
                satisfiability_proportion: self.satisfiability_proportion,
                max_iters_weight_count: self.max_iters_weight_count,
                batch_size: self.batch_size,
                k_graph: self.k,
            },
            shift: ShiftConfig {
                k: self.k,
                learning_rate: self.learning_rate,
                max_iters_shift: self.max_iters_shift,
                shift_threshold: self.shift_threshold,
                eps_stab: 1e-8,
            },
            standardize: self.standardize,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.k < 2 {
            return Err(format!(
                "invalid parameter `k`: {} is too small; the fuzzy graph needs at least 2 neighbors",
                self.k
            ));
        }
        self.to_msde_config().validate().map_err(|e| e.to_string())
    }

    /// Data-dependent validation once the input size is known.
    pub fn validate_for_rows(&self, n: usize) -> Result<(), String> {
        if self.k >= n {
            return Err(format!(
                "invalid parameter `k`: k = {} must be smaller than the number of rows ({n})",
                self.k
            ));
        }
        Ok(())
    }

    /// Full key=value rendering, logged so every run records its effective
    /// configuration.
    pub fn render(&self) -> String {
        format!(
            "k = {}\nnbd_sample_count_threshold = {}\nlearning_rate = {}\nmax_iters_shift = {}\n\
             shift_threshold = {}\nmax_iters_weight_count = {}\nsatisfiability_proportion = {}\n\
             batch_size = {}\nseed = {}\nstandardize = {}",
            self.k,
            self.nbd_sample_count_threshold,
            self.learning_rate,
            self.max_iters_shift,
            self.shift_threshold,
            self.max_iters_weight_count,
            self.satisfiability_proportion,
            self.batch_size,
            self.seed,
            self.standardize,
        )
    }
}

/// Partial configuration collected from a file or from flags; `None` fields
/// leave the lower-precedence value in place.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigOverlay {
    pub k: Option<usize>,
    pub nbd_sample_count_threshold: Option<usize>,
    pub learning_rate: Option<f64>,
    pub max_iters_shift: Option<usize>,
    pub shift_threshold: Option<f64>,
    pub max_iters_weight_count: Option<usize>,
    pub satisfiability_proportion: Option<f64>,
    pub batch_size: Option<usize>,
    pub seed: Option<u64>,
    pub standardize: Option<bool>,
}

impl ConfigOverlay {
    pub fn apply_to(&self, cfg: &mut RunConfig) {
        macro_rules! take {
            ($field:ident) => {
                if let Some(v) = self.$field {
                    cfg.$field = v;
                }
            };
        }
        take!(k);
        take!(nbd_sample_count_threshold);
        take!(learning_rate);
        take!(max_iters_shift);
        take!(shift_threshold);
        take!(max_iters_weight_count);
        take!(satisfiability_proportion);
        take!(batch_size);
        take!(seed);
        take!(standardize);
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str, line: usize) -> Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("config line {line}: invalid value `{value}` for `{key}`"))
}

/// Parse config-file text into an overlay. Unknown keys and malformed lines
/// are errors naming the line; duplicate keys keep the last value. Never
/// panics on malformed input.
pub fn parse_config_text(text: &str) -> Result<ConfigOverlay, String> {
    let mut overlay = ConfigOverlay::default();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {line_no}: expected `key = value`"))?;
        let key = key.trim();
        let value = value.trim();
        match key {
            "k" => overlay.k = Some(parse_value(key, value, line_no)?),
            "nbd_sample_count_threshold" => {
                overlay.nbd_sample_count_threshold = Some(parse_value(key, value, line_no)?)
            }
            "learning_rate" => overlay.learning_rate = Some(parse_value(key, value, line_no)?),
            "max_iters_shift" => overlay.max_iters_shift = Some(parse_value(key, value, line_no)?),
            "shift_threshold" => overlay.shift_threshold = Some(parse_value(key, value, line_no)?),
            "max_iters_weight_count" => {
                overlay.max_iters_weight_count = Some(parse_value(key, value, line_no)?)
            }
            "satisfiability_proportion" => {
                overlay.satisfiability_proportion = Some(parse_value(key, value, line_no)?)
            }
            "batch_size" => overlay.batch_size = Some(parse_value(key, value, line_no)?),
            "seed" => overlay.seed = Some(parse_value(key, value, line_no)?),
            "standardize" => overlay.standardize = Some(parse_value(key, value, line_no)?),
            other => return Err(format!("config line {line_no}: unknown key `{other}`")),
        }
    }
    Ok(overlay)
}
