//! Declarative JSON configuration schema and its translation into core
//! objects. One schema covers every command; see `configs/` for annotated
//! examples.

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use emsim_core::{Mode, Policy, ProcessSource, RatePower, Real, SimConfig, Utility};

/// Stochastic process description.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProcessSpec {
    /// I.i.d. Gaussian clamped at zero.
    Gaussian {
        mean: Real,
        var: Real,
        #[serde(skip_serializing_if = "Option::is_none")]
        asym_var: Option<Real>,
    },
    /// Two-state Markov-modulated Poisson process.
    Mmpp {
        transition: [[Real; 2]; 2],
        state_means: [Real; 2],
        #[serde(skip_serializing_if = "Option::is_none")]
        asym_var: Option<Real>,
    },
    /// Cyclic replay of a text trace (one value per line, `#` comments).
    Trace {
        path: String,
        #[serde(default = "one")]
        scale: Real,
        #[serde(skip_serializing_if = "Option::is_none")]
        asym_var: Option<Real>,
    },
    /// Synthetic diurnal profile: half-sine day, zero night.
    Diurnal {
        peak: Real,
        period: usize,
        day_fraction: Real,
        #[serde(skip_serializing_if = "Option::is_none")]
        asym_var: Option<Real>,
    },
    /// Finite support `[value, probability]` pairs (required for the
    /// exact oracle).
    Discrete {
        support: Vec<(Real, Real)>,
        #[serde(skip_serializing_if = "Option::is_none")]
        asym_var: Option<Real>,
    },
}

fn one() -> Real {
    1.0
}

impl ProcessSpec {
    /// Build the source, applying a unit-conversion factor to the emitted
    /// values (used for replenishment via `energy_unit_scale`).
    pub fn build_scaled(&self, unit_scale: Real) -> Result<ProcessSource<Real>> {
        let src = match self.clone() {
            ProcessSpec::Gaussian { mean, var, .. } => {
                ProcessSource::gaussian_iid(mean * unit_scale, var * unit_scale * unit_scale)?
            }
            ProcessSpec::Mmpp { transition, state_means, .. } => {
                if unit_scale != 1.0 {
                    bail!("energy_unit_scale cannot be applied to an mmpp source (scaled Poisson values are not Poisson); scale state_means directly");
                }
                ProcessSource::mmpp(transition, state_means)?
            }
            ProcessSpec::Trace { path, scale, .. } => {
                ProcessSource::trace_from_path(std::path::Path::new(&path), scale * unit_scale)?
            }
            ProcessSpec::Diurnal { peak, period, day_fraction, .. } => {
                ProcessSource::diurnal(peak * unit_scale, period, day_fraction)?
            }
            ProcessSpec::Discrete { support, .. } => {
                let scaled: Vec<(Real, Real)> =
                    support.iter().map(|&(v, p)| (v * unit_scale, p)).collect();
                ProcessSource::discrete(&scaled)?
            }
        };
        Ok(src)
    }

    pub fn build(&self) -> Result<ProcessSource<Real>> {
        self.build_scaled(1.0)
    }

    /// Declared or overridden asymptotic variance, if any.
    pub fn asym_var(&self, built: &ProcessSource<Real>) -> Option<Real> {
        let explicit = match self {
            ProcessSpec::Gaussian { asym_var, .. }
            | ProcessSpec::Mmpp { asym_var, .. }
            | ProcessSpec::Trace { asym_var, .. }
            | ProcessSpec::Diurnal { asym_var, .. }
            | ProcessSpec::Discrete { asym_var, .. } => *asym_var,
        };
        explicit.or_else(|| built.declared_asym_var())
    }

    /// Same process family re-targeted to a new mean (used by rho
    /// sweeps). Gaussian keeps its variance; the value-carrying kinds
    /// scale their values.
    pub fn with_mean(&self, target: Real) -> Result<ProcessSpec> {
        let mut spec = self.clone();
        match &mut spec {
            ProcessSpec::Gaussian { mean, .. } => *mean = target,
            ProcessSpec::Mmpp { transition, state_means, .. } => {
                let current = ProcessSource::mmpp(*transition, *state_means)?.declared_mean();
                let factor = target / current;
                state_means[0] *= factor;
                state_means[1] *= factor;
            }
            ProcessSpec::Trace { path, scale, .. } => {
                let current =
                    ProcessSource::trace_from_path(std::path::Path::new(&path.clone()), *scale)?
                        .declared_mean();
                *scale *= target / current;
            }
            ProcessSpec::Diurnal { peak, period, day_fraction, .. } => {
                let current =
                    ProcessSource::diurnal(*peak, *period, *day_fraction)?.declared_mean();
                *peak *= target / current;
            }
            ProcessSpec::Discrete { support, .. } => {
                let current = ProcessSource::discrete(support)?.declared_mean();
                let factor = target / current;
                for (v, _) in support.iter_mut() {
                    *v *= factor;
                }
            }
        }
        Ok(spec)
    }
}

/// Rate-power function description.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RateSpec {
    Awgn { gamma: Real },
    /// Service proportional to energy; keeps exact-oracle configurations
    /// on an integer lattice.
    Linear { slope: Real },
}

impl RateSpec {
    pub fn build(&self) -> Result<RatePower<Real>> {
        Ok(match *self {
            RateSpec::Awgn { gamma } => RatePower::awgn(gamma)?,
            RateSpec::Linear { slope } => RatePower::linear(slope)?,
        })
    }

    pub fn gamma(&self) -> Option<Real> {
        match *self {
            RateSpec::Awgn { gamma } => Some(gamma),
            RateSpec::Linear { .. } => None,
        }
    }
}

fn default_rate() -> RateSpec {
    RateSpec::Awgn { gamma: 1.0 }
}

/// Utility function description.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum UtilitySpec {
    /// U(e) = log2(1 + gamma e).
    LogCapacity { gamma: Real },
    /// U_D(C(e)) with U_D(c) = log2(1 + c).
    RateLog,
    /// Tabulated concave function of consumed energy; knots as [x, u].
    EnergyTable { knots: Vec<(Real, Real)> },
    /// Tabulated concave rate utility applied to C(e).
    RateTable { knots: Vec<(Real, Real)> },
}

impl UtilitySpec {
    pub fn build(&self) -> Result<Utility<Real>> {
        Ok(match self {
            UtilitySpec::LogCapacity { gamma } => Utility::log_capacity(*gamma)?,
            UtilitySpec::RateLog => Utility::RateLog,
            UtilitySpec::EnergyTable { knots } => {
                Utility::EnergyTable(emsim_core::ConcaveTable::new(knots)?)
            }
            UtilitySpec::RateTable { knots } => {
                Utility::RateTable(emsim_core::ConcaveTable::new(knots)?)
            }
        })
    }
}

/// Policy description. Drift parameters may be derived from the decay
/// order (`beta` / `beta_q`) or given explicitly.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PolicySpec {
    SchemeB {
        #[serde(skip_serializing_if = "Option::is_none")]
        beta: Option<Real>,
        #[serde(skip_serializing_if = "Option::is_none")]
        delta: Option<Real>,
    },
    SchemeQ {
        #[serde(skip_serializing_if = "Option::is_none")]
        beta_q: Option<Real>,
        #[serde(skip_serializing_if = "Option::is_none")]
        delta1: Option<Real>,
        #[serde(skip_serializing_if = "Option::is_none")]
        delta2: Option<Real>,
    },
    SchemeE {
        delta_r: Real,
    },
    SchemeTo {
        epsilon: Real,
    },
    Constant {
        e: Real,
    },
}

impl PolicySpec {
    pub fn name(&self) -> &'static str {
        match self {
            PolicySpec::SchemeB { .. } => "scheme-b",
            PolicySpec::SchemeQ { .. } => "scheme-q",
            PolicySpec::SchemeE { .. } => "scheme-e",
            PolicySpec::SchemeTo { .. } => "scheme-to",
            PolicySpec::Constant { .. } => "constant",
        }
    }
}

/// One full run description; the schema shared by every command.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub struct SimSpec {
    pub mode: ModeSpec,
    pub battery_capacity: Real,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub buffer_capacity: Option<Real>,
    pub horizon: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warmup: Option<u64>,
    pub seed: u64,
    #[serde(default = "default_replications")]
    pub n_replications: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_battery: Option<Real>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_queue: Option<Real>,
    /// Multiplier converting replenishment units (e.g. mAh) into the
    /// energy argument of the rate-power function.
    #[serde(default = "one")]
    pub energy_unit_scale: Real,
    pub replenishment: ProcessSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arrivals: Option<ProcessSpec>,
    #[serde(default = "default_rate")]
    pub rate_fn: RateSpec,
    pub utility: UtilitySpec,
    pub policy: PolicySpec,
    /// Optional per-slot trace CSV path (simulate command).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_output: Option<String>,
}

fn default_replications() -> usize {
    8
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum ModeSpec {
    BatteryOnly,
    Joint,
}

impl From<ModeSpec> for Mode {
    fn from(m: ModeSpec) -> Mode {
        match m {
            ModeSpec::BatteryOnly => Mode::BatteryOnly,
            ModeSpec::Joint => Mode::Joint,
        }
    }
}

impl SimSpec {
    /// Parse a JSON spec file with line-precise errors.
    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let spec: SimSpec = serde_json::from_str(&text)
            .with_context(|| format!("invalid config {}", path.display()))?;
        Ok(spec)
    }

    pub fn build_policy(
        &self,
        spec: &PolicySpec,
        replenishment: &ProcessSource<Real>,
        arrivals: Option<&ProcessSource<Real>>,
        rate: &RatePower<Real>,
    ) -> Result<Policy<Real>> {
        let mean = replenishment.declared_mean();
        let repl_asym = self.replenishment.asym_var(replenishment);
        let arrival_mean = arrivals.map(|a| a.declared_mean());
        let arrival_asym = match (&self.arrivals, arrivals) {
            (Some(spec), Some(built)) => spec.asym_var(built),
            _ => None,
        };
        let policy = match *spec {
            PolicySpec::SchemeB { beta, delta } => match (beta, delta) {
                (_, Some(d)) => Policy::scheme_b_with_drift(mean, d, self.battery_capacity)?,
                (Some(b), None) => {
                    let asym = repl_asym.ok_or_else(|| anyhow!(
                        "policy (scheme-b): deriving the drift from beta needs the replenishment asymptotic variance; declare `asym_var` on the source (the `stats` command estimates it) or give an explicit `delta`"
                    ))?;
                    Policy::scheme_b(mean, asym, b, self.battery_capacity)?
                }
                (None, None) => bail!("policy (scheme-b): give `beta` or `delta`"),
            },
            PolicySpec::SchemeQ { beta_q, delta1, delta2 } => {
                let k = self
                    .buffer_capacity
                    .ok_or_else(|| anyhow!("policy (scheme-q): buffer_capacity required"))?;
                let lambda = arrival_mean
                    .ok_or_else(|| anyhow!("policy (scheme-q): arrivals required"))?;
                match (beta_q, delta1, delta2) {
                    (_, Some(d1), Some(d2)) => {
                        Policy::scheme_q_with_drifts(mean, lambda, d1, d2, k, rate)?
                    }
                    (Some(b), None, None) => {
                        let asym = arrival_asym.ok_or_else(|| anyhow!(
                            "policy (scheme-q): deriving drifts from beta_q needs the arrival asymptotic variance; declare `asym_var` on the source or give explicit `delta1`/`delta2`"
                        ))?;
                        Policy::scheme_q(mean, lambda, asym, b, k, rate)?
                    }
                    _ => bail!("policy (scheme-q): give `beta_q` or both `delta1` and `delta2`"),
                }
            }
            PolicySpec::SchemeE { delta_r } => {
                let lambda = arrival_mean.unwrap_or(0.0);
                Policy::scheme_e(mean, delta_r, lambda, rate)?
            }
            PolicySpec::SchemeTo { epsilon } => {
                Policy::throughput_optimal(mean, epsilon, arrival_mean, rate)?
            }
            PolicySpec::Constant { e } => Policy::constant(e)?,
        };
        Ok(policy)
    }

    /// Build the full core configuration; returns it with any advisory
    /// warnings from validation.
    pub fn build(&self) -> Result<(SimConfig<Real>, Vec<String>)> {
        self.build_with(self.policy, None, None)
    }

    /// Build with a policy override and optional capacity overrides
    /// (used by sweeps).
    pub fn build_with(
        &self,
        policy_spec: PolicySpec,
        battery_override: Option<Real>,
        buffer_override: Option<Real>,
    ) -> Result<(SimConfig<Real>, Vec<String>)> {
        let battery_capacity = battery_override.unwrap_or(self.battery_capacity);
        let buffer_capacity = buffer_override.or(self.buffer_capacity);
        let replenishment = self
            .replenishment
            .build_scaled(self.energy_unit_scale)
            .context("replenishment")?;
        let arrivals = match &self.arrivals {
            Some(a) => Some(a.build().context("arrivals")?),
            None => None,
        };
        let rate = self.rate_fn.build().context("rate_fn")?;
        let utility = self.utility.build().context("utility")?;
        let spec_for_policy = SimSpec {
            battery_capacity,
            buffer_capacity,
            ..self.clone()
        };
        let policy = spec_for_policy
            .build_policy(&policy_spec, &replenishment, arrivals.as_ref(), &rate)
            .context("policy")?;
        let cfg = SimConfig {
            mode: self.mode.into(),
            battery_capacity,
            buffer_capacity,
            horizon: self.horizon,
            warmup: self.warmup,
            replenishment,
            arrivals,
            policy,
            utility,
            rate,
            seed: self.seed,
            initial_battery: self.initial_battery,
            initial_queue: self.initial_queue,
        };
        let warnings = cfg.validate().map_err(|e| anyhow!("{e}"))?;
        Ok((cfg, warnings))
    }
}

/// Swept axis for the sweep command.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    /// Battery capacity grid.
    Battery,
    /// Buffer capacity grid.
    Buffer,
    /// Traffic intensity grid: each value rho sets the arrival mean to
    /// rho * C(mean replenishment).
    Rho,
    /// Constant-draw drift grid (scheme-e).
    DeltaR,
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::Battery => "battery",
            SweepAxis::Buffer => "buffer",
            SweepAxis::Rho => "rho",
            SweepAxis::DeltaR => "delta-r",
        }
    }
}

/// Sweep description: one axis, several policies.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub struct SweepSpec {
    pub base: SimSpec,
    pub axis: SweepAxis,
    pub values: Vec<Real>,
    pub policies: Vec<PolicySpec>,
}

impl SweepSpec {
    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read sweep spec {}", path.display()))?;
        let spec: SweepSpec = serde_json::from_str(&text)
            .with_context(|| format!("invalid sweep spec {}", path.display()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.policies.is_empty() {
            bail!("sweep (policies): at least one policy is required");
        }
        if self.values.len() < 2 {
            bail!("sweep (values): at least two grid values are required");
        }
        let mut last = 0.0;
        for &v in &self.values {
            if v <= last {
                bail!("sweep (values): grid must be strictly increasing and positive");
            }
            last = v;
        }
        if self.axis == SweepAxis::Rho {
            if let Some(&v) = self.values.last() {
                if v >= 1.0 {
                    bail!("sweep (values): traffic intensities must lie in (0, 1)");
                }
            }
        }
        Ok(())
    }
}

/// Tradeoff exploration description.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub struct TradeoffSpec {
    pub base: SimSpec,
    /// Theory curve resolution.
    #[serde(default = "default_grid")]
    pub n_grid: usize,
    /// Up to three constant-draw drifts to simulate.
    pub operating_points: Vec<Real>,
    /// Battery grid for discharge-exponent fits.
    pub m_grid: Vec<Real>,
    /// Buffer grid for loss-exponent fits.
    pub k_grid: Vec<Real>,
}

fn default_grid() -> usize {
    50
}

impl TradeoffSpec {
    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read tradeoff spec {}", path.display()))?;
        let spec: TradeoffSpec = serde_json::from_str(&text)
            .with_context(|| format!("invalid tradeoff spec {}", path.display()))?;
        if spec.operating_points.len() > 3 {
            bail!("tradeoff (operating_points): at most three operating points");
        }
        Ok(spec)
    }
}

/// Process statistics estimation request.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub struct StatsSpec {
    pub source: ProcessSpec,
    pub horizon: u64,
    pub batch_len: u64,
    #[serde(default)]
    pub seed: u64,
}

impl StatsSpec {
    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read stats spec {}", path.display()))?;
        let spec: StatsSpec = serde_json::from_str(&text)
            .with_context(|| format!("invalid stats spec {}", path.display()))?;
        Ok(spec)
    }
}
