//! Randomized check sweeps and their violation reports.

use serde::{Deserialize, Serialize};

use crate::exec::{self, ExecMode};

/// Default additive tolerance factor: a check passes when
/// `residual <= tol * (1 + scale)` where `scale` tracks the magnitude of the
/// quantities entering the inequality.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Worst offending draw of a sweep.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Witness {
    pub trial: u64,
    pub residual: f64,
    pub check: String,
    pub points: Vec<String>,
}

/// Outcome of a randomized inequality sweep.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ViolationReport {
    pub trials: u64,
    pub violations: u64,
    pub worst_residual: f64,
    pub witness: Option<Witness>,
}

impl ViolationReport {
    pub fn empty() -> Self {
        ViolationReport {
            trials: 0,
            violations: 0,
            worst_residual: f64::NEG_INFINITY,
            witness: None,
        }
    }

    pub fn is_clean(&self) -> bool {
        self.violations == 0
    }

    /// Associative merge; ties on residual resolve to the lower trial index.
    pub fn merge(mut self, other: ViolationReport) -> ViolationReport {
        self.trials += other.trials;
        self.violations += other.violations;
        let take_other = match (&self.witness, &other.witness) {
            (_, None) => false,
            (None, Some(_)) => true,
            (Some(a), Some(b)) => {
                b.residual > a.residual || (b.residual == a.residual && b.trial < a.trial)
            }
        };
        if take_other {
            self.witness = other.witness;
        }
        self.worst_residual = self.worst_residual.max(other.worst_residual);
        self
    }
}

/// One evaluated check inside a sweep trial.
pub struct TrialOutcome {
    /// Signed residual; the inequality claims `residual <= 0`.
    pub residual: f64,
    /// Magnitude used for the additive tolerance.
    pub scale: f64,
    pub check: &'static str,
    pub points: Vec<String>,
}

/// Runs `trials` randomized trials in deterministic blocks.
///
/// `eval` receives the block RNG and the global trial index and returns the
/// outcomes of every sub-check of that trial (empty when the draw was
/// rejected by a precondition). A trial counts as at most one violation no
/// matter how many of its sub-checks fail, so `violations <= trials`.
pub fn run_sweep<F>(trials: u64, seed: u64, tol: f64, mode: ExecMode, eval: F) -> ViolationReport
where
    F: Fn(&mut rand_chacha::ChaCha8Rng, u64) -> Vec<TrialOutcome> + Sync,
{
    let blocks = exec::block_count(trials);
    exec::map_reduce_blocks(
        blocks,
        mode,
        |block| {
            let mut rng = exec::substream(seed, &[0x5eed, block]);
            let len = exec::block_len(trials, block);
            let mut report = ViolationReport::empty();
            for i in 0..len {
                let trial = block * exec::BLOCK_SIZE + i;
                let outcomes = eval(&mut rng, trial);
                report.trials += 1;
                let mut trial_violated = false;
                for out in outcomes {
                    let threshold = tol * (1.0 + out.scale.abs());
                    let violated = out.residual > threshold;
                    trial_violated |= violated;
                    if out.residual > report.worst_residual {
                        report.worst_residual = out.residual;
                    }
                    let replace = match &report.witness {
                        None => violated,
                        Some(w) => violated && out.residual > w.residual,
                    };
                    if replace {
                        report.witness = Some(Witness {
                            trial,
                            residual: out.residual,
                            check: out.check.to_string(),
                            points: out.points,
                        });
                    }
                }
                if trial_violated {
                    report.violations += 1;
                }
            }
            report
        },
        ViolationReport::merge,
        ViolationReport::empty(),
    )
}
