//! Scenario configuration: a TOML file of `key = value` blocks, with small
//! call-syntax values (`gaussian(8, 1.5, 1)`, `thermal(2.0)`, `restart(12)`)
//! for the tagged choices. Unknown keys and blocks are rejected.

use std::fmt;
use std::path::PathBuf;

use serde::Deserialize;

use crate::{CliError, Result};

/// Fully parsed scenario, ready to be handed to the module constructors.
#[derive(Debug, Clone)]
pub struct Scenario {
    /// Grid geometry and switching window.
    pub lattice: LatticeBlock,
    /// Couplings, masses, counterterm coefficients and the expansion scale.
    pub physics: PhysicsBlock,
    /// Initial two-point data of the quantized field.
    pub state: StateSpec,
    /// Initial data of the classical field.
    pub classical: ClassicalBlock,
    /// Switching mode of the run.
    pub mode: ModeSpec,
    /// Artifact destination; optional because `verify` writes no field files.
    pub output: Option<OutputBlock>,
}

/// `[lattice]` block.
#[derive(Debug, Clone)]
pub struct LatticeBlock {
    /// Number of spatial sites.
    pub n_x: usize,
    /// Circumference of the spatial circle.
    pub l: f64,
    /// Time step.
    pub dt: f64,
    /// Number of time steps.
    pub n_t: usize,
    /// Initial time.
    pub t_i: f64,
    /// Requested switch-on time (snapped to the grid by the constructor).
    pub t_on: f64,
    /// Requested switch-off time (snapped to the grid by the constructor).
    pub t_f: f64,
}

/// `[physics]` block.
#[derive(Debug, Clone)]
pub struct PhysicsBlock {
    /// Coupling strength λ.
    pub lambda: f64,
    /// Truncation order n.
    pub order: usize,
    /// Classical-field mass M.
    pub classical_mass: f64,
    /// Quantum-field mass m.
    pub quantum_mass: f64,
    /// Counterterm coefficient on m² at order 0.
    pub beta1: f64,
    /// Counterterm coefficient on χψ at orders ≥ 1.
    pub beta2: f64,
    /// Counterterm coefficient on the scalar curvature (inert on the cylinder).
    pub beta3: f64,
    /// Length scale ℓ of the 4d expansion (echoed in reports).
    pub ell: f64,
}

/// `[state]` block: initial two-point data.
#[derive(Debug, Clone, PartialEq)]
pub enum StateSpec {
    /// Ground state of the free stepper-matched dispersion.
    Vacuum,
    /// Thermal state at the given temperature.
    Thermal(f64),
    /// Explicit blocks loaded from a CSV file (`block,x,y,re,im`).
    File(PathBuf),
}

/// One classical-data profile.
#[derive(Debug, Clone, PartialEq)]
pub enum ProfileSpec {
    /// Identically zero.
    Zero,
    /// Periodic Gaussian bump `amplitude · exp(−d(x, center)²/(2 width²))`.
    Gaussian {
        /// Center position on the circle.
        center: f64,
        /// Width (> 0).
        width: f64,
        /// Peak amplitude.
        amplitude: f64,
    },
    /// `amplitude · cos(2π · mode · x / L)`.
    Cosine {
        /// Integer mode number.
        mode: i64,
        /// Amplitude.
        amplitude: f64,
    },
}

/// `[classical-data]` block: profiles for the field and its momentum.
#[derive(Debug, Clone)]
pub struct ClassicalBlock {
    /// Initial classical field ς.
    pub sigma: ProfileSpec,
    /// Initial classical momentum ϖ.
    pub pi: ProfileSpec,
}

/// `[mode]` block.
#[derive(Debug, Clone, PartialEq)]
pub enum ModeSpec {
    /// Smooth compactly supported switching on `(t_on, t_f)`.
    Switched,
    /// χ ≡ 1 with per-order corrected initial data.
    AlwaysOnCorrected,
    /// χ rising on `(t_on, t_f)` then held at 1; the run is cut at the given
    /// time and continued from reconstructed per-order data.
    Restart(f64),
}

/// Which artifact families to write.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    /// The three long-format CSV field files.
    Csv,
    /// The JSON run report.
    Json,
}

/// `[output]` block.
#[derive(Debug, Clone)]
pub struct OutputBlock {
    /// Directory the artifact files are written into (created if absent).
    pub directory: PathBuf,
    /// Artifact families to write.
    pub formats: Vec<Format>,
    /// Slice stride for the equal-time two-point samples.
    pub sample_stride: usize,
}

impl fmt::Display for StateSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateSpec::Vacuum => write!(f, "vacuum"),
            StateSpec::Thermal(t) => write!(f, "thermal({t})"),
            StateSpec::File(p) => write!(f, "file({})", p.display()),
        }
    }
}

impl fmt::Display for ProfileSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProfileSpec::Zero => write!(f, "zero"),
            ProfileSpec::Gaussian { center, width, amplitude } => {
                write!(f, "gaussian({center}, {width}, {amplitude})")
            }
            ProfileSpec::Cosine { mode, amplitude } => write!(f, "cosine({mode}, {amplitude})"),
        }
    }
}

impl fmt::Display for ModeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModeSpec::Switched => write!(f, "switched"),
            ModeSpec::AlwaysOnCorrected => write!(f, "always_on_corrected"),
            ModeSpec::Restart(t) => write!(f, "restart({t})"),
        }
    }
}

// ---------------------------------------------------------------------------
// raw TOML layer
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    lattice: RawLattice,
    physics: RawPhysics,
    state: RawState,
    #[serde(rename = "classical-data")]
    classical_data: RawClassical,
    mode: RawMode,
    output: Option<RawOutput>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLattice {
    n_x: usize,
    #[serde(rename = "L")]
    l: f64,
    dt: f64,
    n_t: usize,
    t_i: f64,
    t_on: f64,
    t_f: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPhysics {
    lambda: f64,
    n: usize,
    #[serde(rename = "M")]
    classical_mass: f64,
    m: f64,
    #[serde(default)]
    beta1: f64,
    #[serde(default)]
    beta2: f64,
    #[serde(default)]
    beta3: f64,
    #[serde(default = "default_ell")]
    ell: f64,
}

fn default_ell() -> f64 {
    1.0
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawState {
    kind: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawClassical {
    sigma: String,
    pi: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMode {
    kind: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    directory: String,
    #[serde(default = "default_formats")]
    formats: Vec<String>,
    #[serde(default = "default_stride")]
    sample_stride: usize,
}

fn default_formats() -> Vec<String> {
    vec!["csv".into(), "json".into()]
}

fn default_stride() -> usize {
    1
}

// ---------------------------------------------------------------------------
// parsing
// ---------------------------------------------------------------------------

/// Parses a scenario from TOML text. Every failure is a parse error (exit 2):
/// syntax, unknown keys, missing keys, or malformed call-syntax values.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let raw: RawScenario =
        toml::from_str(text).map_err(|e| CliError::Parse(one_line(&e.to_string())))?;

    let lattice = LatticeBlock {
        n_x: raw.lattice.n_x,
        l: raw.lattice.l,
        dt: raw.lattice.dt,
        n_t: raw.lattice.n_t,
        t_i: raw.lattice.t_i,
        t_on: raw.lattice.t_on,
        t_f: raw.lattice.t_f,
    };
    let physics = PhysicsBlock {
        lambda: raw.physics.lambda,
        order: raw.physics.n,
        classical_mass: raw.physics.classical_mass,
        quantum_mass: raw.physics.m,
        beta1: raw.physics.beta1,
        beta2: raw.physics.beta2,
        beta3: raw.physics.beta3,
        ell: raw.physics.ell,
    };
    let state = parse_state(&raw.state.kind)?;
    let classical = ClassicalBlock {
        sigma: parse_profile("classical-data.sigma", &raw.classical_data.sigma)?,
        pi: parse_profile("classical-data.pi", &raw.classical_data.pi)?,
    };
    let mode = parse_mode(&raw.mode.kind)?;
    let output = raw.output.map(parse_output).transpose()?;

    Ok(Scenario { lattice, physics, state, classical, mode, output })
}

fn parse_output(raw: RawOutput) -> Result<OutputBlock> {
    let mut formats = Vec::new();
    for f in &raw.formats {
        let fmt = match f.as_str() {
            "csv" => Format::Csv,
            "json" => Format::Json,
            other => {
                return Err(CliError::Parse(format!(
                    "output.formats: unknown format `{other}` (expected csv or json)"
                )))
            }
        };
        if !formats.contains(&fmt) {
            formats.push(fmt);
        }
    }
    if raw.sample_stride == 0 {
        return Err(CliError::Parse("output.sample_stride must be at least 1".into()));
    }
    Ok(OutputBlock {
        directory: PathBuf::from(raw.directory),
        formats,
        sample_stride: raw.sample_stride,
    })
}

fn parse_state(kind: &str) -> Result<StateSpec> {
    let (name, args) = parse_call("state.kind", kind)?;
    match (name.as_str(), args.as_slice()) {
        ("vacuum", []) => Ok(StateSpec::Vacuum),
        ("thermal", [t]) => Ok(StateSpec::Thermal(parse_f64("state.kind thermal temperature", t)?)),
        ("file", [path]) if !path.is_empty() => Ok(StateSpec::File(PathBuf::from(path))),
        _ => Err(CliError::Parse(format!(
            "state.kind: expected vacuum, thermal(temperature) or file(path), got `{kind}`"
        ))),
    }
}

fn parse_profile(key: &str, value: &str) -> Result<ProfileSpec> {
    let (name, args) = parse_call(key, value)?;
    match (name.as_str(), args.as_slice()) {
        ("zero", []) => Ok(ProfileSpec::Zero),
        ("gaussian", [c, w, a]) => Ok(ProfileSpec::Gaussian {
            center: parse_f64(key, c)?,
            width: parse_f64(key, w)?,
            amplitude: parse_f64(key, a)?,
        }),
        ("cosine", [m, a]) => Ok(ProfileSpec::Cosine {
            mode: parse_i64(key, m)?,
            amplitude: parse_f64(key, a)?,
        }),
        _ => Err(CliError::Parse(format!(
            "{key}: expected zero, gaussian(center, width, amplitude) or \
             cosine(mode, amplitude), got `{value}`"
        ))),
    }
}

fn parse_mode(kind: &str) -> Result<ModeSpec> {
    let (name, args) = parse_call("mode.kind", kind)?;
    match (name.as_str(), args.as_slice()) {
        ("switched", []) => Ok(ModeSpec::Switched),
        ("always_on_corrected", []) => Ok(ModeSpec::AlwaysOnCorrected),
        ("restart", [t]) => Ok(ModeSpec::Restart(parse_f64("mode.kind restart time", t)?)),
        _ => Err(CliError::Parse(format!(
            "mode.kind: expected switched, always_on_corrected or restart(time), got `{kind}`"
        ))),
    }
}

/// Splits `name(arg, arg, ...)` into the name and trimmed arguments; a bare
/// word is a zero-argument call.
fn parse_call(key: &str, s: &str) -> Result<(String, Vec<String>)> {
    let s = s.trim();
    match s.find('(') {
        None => {
            if s.is_empty() {
                return Err(CliError::Parse(format!("{key}: empty value")));
            }
            Ok((s.to_string(), Vec::new()))
        }
        Some(i) => {
            if !s.ends_with(')') {
                return Err(CliError::Parse(format!("{key}: missing closing `)` in `{s}`")));
            }
            let name = s[..i].trim().to_string();
            let inner = &s[i + 1..s.len() - 1];
            let args = if inner.trim().is_empty() {
                Vec::new()
            } else {
                inner.split(',').map(|a| a.trim().to_string()).collect()
            };
            Ok((name, args))
        }
    }
}

fn parse_f64(key: &str, s: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| CliError::Parse(format!("{key}: `{s}` is not a number")))
}

fn parse_i64(key: &str, s: &str) -> Result<i64> {
    s.parse::<i64>()
        .map_err(|_| CliError::Parse(format!("{key}: `{s}` is not an integer")))
}

/// Collapses a multi-line error message into one diagnostic-stream line.
pub(crate) fn one_line(msg: &str) -> String {
    msg.lines().map(str::trim).filter(|l| !l.is_empty()).collect::<Vec<_>>().join(" | ")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn full_config() -> String {
        r#"
[lattice]
n_x = 64
L = 16.0
dt = 0.2
n_t = 120
t_i = 0.0
t_on = 4.0
t_f = 20.0

[physics]
lambda = 0.2
n = 2
M = 1.0
m = 1.0
beta1 = 0.0
beta2 = 0.0
beta3 = 0.0
ell = 1.0

[state]
kind = "vacuum"

[classical-data]
sigma = "gaussian(8, 1.5, 1)"
pi = "zero"

[mode]
kind = "switched"

[output]
directory = "out"
formats = ["csv", "json"]
sample_stride = 10
"#
        .to_string()
    }

    #[test]
    fn full_scenario_parses_with_every_block() {
        let s = parse_scenario(&full_config()).unwrap();
        assert_eq!(s.lattice.n_x, 64);
        assert_eq!(s.physics.order, 2);
        assert_eq!(s.state, StateSpec::Vacuum);
        assert_eq!(
            s.classical.sigma,
            ProfileSpec::Gaussian { center: 8.0, width: 1.5, amplitude: 1.0 }
        );
        assert_eq!(s.classical.pi, ProfileSpec::Zero);
        assert_eq!(s.mode, ModeSpec::Switched);
        let out = s.output.unwrap();
        assert_eq!(out.formats, vec![Format::Csv, Format::Json]);
        assert_eq!(out.sample_stride, 10);
    }

    #[test]
    fn unknown_keys_are_rejected_in_every_block() {
        for (needle, extra) in [
            ("[lattice]", "n_y = 3"),
            ("[physics]", "gamma = 0.1"),
            ("[state]", "temp = 1.0"),
            ("[mode]", "when = 2.0"),
            ("[output]", "compress = true"),
        ] {
            let cfg = full_config().replace(needle, &format!("{needle}\n{extra}"));
            let err = parse_scenario(&cfg).unwrap_err();
            assert!(
                matches!(err, CliError::Parse(_)),
                "extra `{extra}` should be a parse error, got {err:?}"
            );
        }
        let cfg = format!("{}\n[extra]\nx = 1\n", full_config());
        assert!(matches!(parse_scenario(&cfg).unwrap_err(), CliError::Parse(_)));
    }

    #[test]
    fn call_syntax_variants_and_failures() {
        assert_eq!(parse_state("thermal(2.5)").unwrap(), StateSpec::Thermal(2.5));
        assert_eq!(
            parse_state("file(data/init.csv)").unwrap(),
            StateSpec::File(PathBuf::from("data/init.csv"))
        );
        assert_eq!(parse_mode("restart(12.0)").unwrap(), ModeSpec::Restart(12.0));
        assert_eq!(
            parse_profile("p", "cosine(3, 0.5)").unwrap(),
            ProfileSpec::Cosine { mode: 3, amplitude: 0.5 }
        );
        for bad in ["thermal", "thermal(1, 2)", "thermal(warm)", "file()", "melted(1)"] {
            assert!(parse_state(bad).is_err(), "`{bad}` should fail");
        }
        for bad in ["gaussian(1, 2)", "cosine(1.5, 2)", "gauss(1, 2, 3)", "zero(1)"] {
            assert!(parse_profile("p", bad).is_err(), "`{bad}` should fail");
        }
        assert!(parse_mode("restart(").is_err());
    }

    #[test]
    fn defaults_fill_in_betas_scale_formats_and_stride() {
        let cfg = full_config()
            .replace("beta1 = 0.0\n", "")
            .replace("beta2 = 0.0\n", "")
            .replace("beta3 = 0.0\n", "")
            .replace("ell = 1.0\n", "")
            .replace("formats = [\"csv\", \"json\"]\n", "")
            .replace("sample_stride = 10\n", "");
        let s = parse_scenario(&cfg).unwrap();
        assert_eq!((s.physics.beta1, s.physics.beta2, s.physics.beta3), (0.0, 0.0, 0.0));
        assert_eq!(s.physics.ell, 1.0);
        let out = s.output.unwrap();
        assert_eq!(out.formats, vec![Format::Csv, Format::Json]);
        assert_eq!(out.sample_stride, 1);
    }

    #[test]
    fn missing_output_block_is_allowed() {
        let cfg = full_config();
        let cfg = &cfg[..cfg.find("[output]").unwrap()];
        let s = parse_scenario(cfg).unwrap();
        assert!(s.output.is_none());
    }

    #[test]
    fn malformed_toml_and_bad_stride_are_parse_errors() {
        assert!(matches!(parse_scenario("not = [toml").unwrap_err(), CliError::Parse(_)));
        let cfg = full_config().replace("sample_stride = 10", "sample_stride = 0");
        assert!(matches!(parse_scenario(&cfg).unwrap_err(), CliError::Parse(_)));
        let cfg = full_config().replace("formats = [\"csv\", \"json\"]", "formats = [\"yaml\"]");
        assert!(matches!(parse_scenario(&cfg).unwrap_err(), CliError::Parse(_)));
    }
}
