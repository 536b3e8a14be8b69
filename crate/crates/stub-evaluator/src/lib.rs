//! Stand-in for the external WNO evaluator.
//!
//! Speaks the evaluator side of the NDJSON reward protocol and produces the
//! same 1D steady-diffusion dataset and `.npz` cache file. Instead of
//! training a wavelet neural operator per request it returns a deterministic
//! proxy validation loss derived from the architecture, so search runs
//! finish in seconds and are reproducible.

use std::path::Path;

use ndarray::Array2;
use ndarray_npy::{NpzReader, NpzWriter};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::{json, Value};

pub const MIN_GRID: usize = 64;

/// Wavelet families the evaluator accepts.
pub const WAVELETS: &[&str] = &["db4", "db6", "coif6", "bior6.8", "rbio6.8", "sym6", "haar"];

/// Activations the evaluator accepts.
pub const ACTIVATIONS: &[&str] = &["gelu", "relu", "elu", "tanh", "silu", "mish", "sigmoid", "leaky_relu"];

/// Coefficient range of the random diffusion fields.
const COEFF_LOW: f64 = 3.0;
const COEFF_HIGH: f64 = 12.0;

/// Coefficient fields and solutions, one sample per row.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorDataset {
    pub input: Array2<f64>,
    pub output: Array2<f64>,
}

#[derive(Debug)]
pub enum DatasetError {
    GridTooSmall(usize),
    Shape(String),
    Io(String),
}

impl std::fmt::Display for DatasetError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DatasetError::GridTooSmall(g) => write!(f, "grid {g} is below the minimum {MIN_GRID}"),
            DatasetError::Shape(m) => write!(f, "dataset shape: {m}"),
            DatasetError::Io(m) => write!(f, "dataset file: {m}"),
        }
    }
}

impl std::error::Error for DatasetError {}

/// Solves `-(a u')' = 1` on `[0, 1]` with `u(0) = u(1) = 0`, `a` sampled at
/// the grid nodes. Uses the conservative second-order stencil with
/// midpoint coefficients and a direct tridiagonal solve.
pub fn solve_diffusion(a: &[f64]) -> Vec<f64> {
    let n = a.len();
    let mut u = vec![0.0; n];
    if n < 3 {
        return u;
    }
    let (lower, diag, upper) = stencil(a);
    let m = n - 2;
    // Thomas algorithm on the interior unknowns
    let mut c = vec![0.0; m];
    let mut d = vec![0.0; m];
    for i in 0..m {
        let denom = diag[i] - if i > 0 { lower[i] * c[i - 1] } else { 0.0 };
        c[i] = upper[i] / denom;
        d[i] = (1.0 - if i > 0 { lower[i] * d[i - 1] } else { 0.0 }) / denom;
    }
    for i in (0..m).rev() {
        u[i + 1] = d[i] - if i + 1 < m { c[i] * u[i + 2] } else { 0.0 };
    }
    u
}

/// Interior rows of the assembled system `A u = 1`: sub-, main and super-diagonal.
fn stencil(a: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = a.len();
    let h2 = ((n - 1) as f64).powi(-2);
    let mid = |i: usize| 0.5 * (a[i] + a[i + 1]);
    let mut lower = Vec::with_capacity(n - 2);
    let mut diag = Vec::with_capacity(n - 2);
    let mut upper = Vec::with_capacity(n - 2);
    for i in 1..n - 1 {
        lower.push(-mid(i - 1) / h2);
        diag.push((mid(i - 1) + mid(i)) / h2);
        upper.push(-mid(i) / h2);
    }
    (lower, diag, upper)
}

/// `max |A u - 1|` over interior nodes of the assembled system.
pub fn pde_residual(a: &[f64], u: &[f64]) -> f64 {
    let n = a.len();
    if n < 3 {
        return 0.0;
    }
    let (lower, diag, upper) = stencil(a);
    (1..n - 1)
        .map(|i| {
            let k = i - 1;
            (lower[k] * u[i - 1] + diag[k] * u[i] + upper[k] * u[i + 1] - 1.0).abs()
        })
        .fold(0.0, f64::max)
}

/// Random piecewise-constant field with values in `[3, 12]`, smoothed by a moving average.
fn random_coefficient(grid: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let steps = rng.gen_range(2..=6);
    let mut cuts: Vec<usize> = (0..steps - 1).map(|_| rng.gen_range(1..grid - 1)).collect();
    cuts.sort_unstable();
    let values: Vec<f64> = (0..steps).map(|_| rng.gen_range(COEFF_LOW..=COEFF_HIGH)).collect();
    let raw: Vec<f64> = (0..grid)
        .map(|i| values[cuts.iter().filter(|&&c| c <= i).count()])
        .collect();
    let half = (grid / 32).max(1);
    (0..grid)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(grid - 1);
            raw[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect()
}

pub fn generate_dataset(n_samples: usize, grid: usize, seed: u64) -> Result<OperatorDataset, DatasetError> {
    if grid < MIN_GRID {
        return Err(DatasetError::GridTooSmall(grid));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut input = Array2::zeros((n_samples, grid));
    let mut output = Array2::zeros((n_samples, grid));
    for s in 0..n_samples {
        let a = random_coefficient(grid, &mut rng);
        let u = solve_diffusion(&a);
        for i in 0..grid {
            input[[s, i]] = a[i];
            output[[s, i]] = u[i];
        }
    }
    Ok(OperatorDataset { input, output })
}

impl OperatorDataset {
    pub fn save_npz(&self, path: &Path) -> Result<(), DatasetError> {
        let io = |e: &dyn std::fmt::Display| DatasetError::Io(format!("{}: {e}", path.display()));
        let file = std::fs::File::create(path).map_err(|e| io(&e))?;
        let mut npz = NpzWriter::new(file);
        npz.add_array("input", &self.input).map_err(|e| io(&e))?;
        npz.add_array("output", &self.output).map_err(|e| io(&e))?;
        npz.finish().map_err(|e| io(&e))?;
        Ok(())
    }

    pub fn load_npz(path: &Path) -> Result<Self, DatasetError> {
        let io = |e: &dyn std::fmt::Display| DatasetError::Io(format!("{}: {e}", path.display()));
        let file = std::fs::File::open(path).map_err(|e| io(&e))?;
        let mut npz = NpzReader::new(file).map_err(|e| io(&e))?;
        let input: Array2<f64> = npz.by_name("input").map_err(|e| io(&e))?;
        let output: Array2<f64> = npz.by_name("output").map_err(|e| io(&e))?;
        if input.dim() != output.dim() {
            return Err(DatasetError::Shape(format!(
                "input {:?} and output {:?} differ",
                input.dim(),
                output.dim()
            )));
        }
        Ok(OperatorDataset { input, output })
    }

    pub fn samples(&self) -> usize {
        self.input.nrows()
    }

    pub fn grid(&self) -> usize {
        self.input.ncols()
    }
}

/// Startup settings of the serve loop.
#[derive(Debug, Clone, PartialEq)]
pub struct ServeConfig {
    pub seed: u64,
    pub width: usize,
    pub proxy_epochs: u32,
    pub deterministic: bool,
    pub concurrent_safe: bool,
    /// Answer every n-th request with an error response.
    pub fail_every: Option<u64>,
    /// Report a reward that disagrees with `exp(-val_loss)`.
    pub inconsistent: bool,
    /// Emit a log line before every response.
    pub log_requests: bool,
}

impl Default for ServeConfig {
    fn default() -> Self {
        ServeConfig {
            seed: 0,
            width: 16,
            proxy_epochs: 20,
            deterministic: true,
            concurrent_safe: false,
            fail_every: None,
            inconsistent: false,
            log_requests: false,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Block {
    wavelet: String,
    activation: String,
}

#[derive(Deserialize)]
struct Budget {
    epochs: u32,
}

#[derive(Deserialize)]
struct Request {
    id: i64,
    architecture: Vec<Block>,
    #[serde(default)]
    budget: Option<Budget>,
}

/// What the serve loop should do with one input line.
#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Reply(Vec<String>),
    Shutdown,
}

pub struct Server {
    cfg: ServeConfig,
    handled: u64,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

impl Server {
    pub fn new(cfg: ServeConfig) -> Self {
        Server { cfg, handled: 0 }
    }

    pub fn hello(&self) -> String {
        json!({
            "type": "hello",
            "protocol": 1,
            "deterministic": self.cfg.deterministic,
            "concurrent_safe": self.cfg.concurrent_safe,
        })
        .to_string()
    }

    /// Proxy validation loss (a fraction, roughly 0.005 to 0.05), falling with epochs.
    pub fn proxy_val_loss(&self, blocks: &[(String, String)], epochs: u32) -> f64 {
        let key: Vec<String> = blocks.iter().map(|(w, a)| format!("{w}/{a}")).collect();
        let salt = if self.cfg.deterministic { 0 } else { self.handled };
        let text = format!("{}|{}|{}|{}", key.join("/"), self.cfg.seed, self.cfg.width, salt);
        let u = (fnv1a(text.as_bytes()) >> 11) as f64 / (1u64 << 53) as f64;
        (0.005 + 0.03 * u) * (20.0 / epochs.max(1) as f64).sqrt()
    }

    pub fn handle(&mut self, line: &str) -> Action {
        let value: Value = match serde_json::from_str(line) {
            Ok(v) => v,
            Err(e) => return Action::Reply(vec![error_line(-1, &format!("unparseable request: {e}"))]),
        };
        if value.get("type").and_then(Value::as_str) == Some("shutdown") {
            return Action::Shutdown;
        }
        let id = value.get("id").and_then(Value::as_i64).unwrap_or(-1);
        let request: Request = match serde_json::from_value(value) {
            Ok(r) => r,
            Err(e) => return Action::Reply(vec![error_line(id, &format!("malformed request: {e}"))]),
        };
        let id = request.id;
        self.handled += 1;
        let mut out = Vec::new();
        if self.cfg.log_requests {
            out.push(json!({"type": "log", "message": format!("request {id}")}).to_string());
        }
        if self.cfg.fail_every.is_some_and(|n| self.handled % n == 0) {
            out.push(error_line(id, "injected failure"));
            return Action::Reply(out);
        }
        let mut blocks = Vec::with_capacity(request.architecture.len());
        for b in request.architecture {
            if !WAVELETS.contains(&b.wavelet.as_str()) {
                out.push(error_line(id, &format!("unknown wavelet {:?}", b.wavelet)));
                return Action::Reply(out);
            }
            if !ACTIVATIONS.contains(&b.activation.as_str()) {
                out.push(error_line(id, &format!("unknown activation {:?}", b.activation)));
                return Action::Reply(out);
            }
            blocks.push((b.wavelet, b.activation));
        }
        let epochs = request.budget.map_or(self.cfg.proxy_epochs, |b| b.epochs);
        let val_loss = self.proxy_val_loss(&blocks, epochs);
        let mut reward = (-val_loss).exp();
        if self.cfg.inconsistent {
            reward *= 1.01;
        }
        out.push(json!({"id": id, "reward": reward, "metrics": {"val_loss": val_loss}}).to_string());
        Action::Reply(out)
    }
}

fn error_line(id: i64, message: &str) -> String {
    json!({"id": id, "error": message}).to_string()
}
