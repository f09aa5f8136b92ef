//! Run configuration: JSON schema, named presets, and the run manifest.

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use frechet_core::cost::{BregmanGenerator, CostDescriptor, QuadrupleStructure};
use frechet_core::estimator::EstimatorConfig;
use frechet_core::harness::DistributionSpec;
use frechet_core::space::{
    DistanceKind, Hole, MetricSpaceDescriptor, MetricTree, SampleWindow, SpacePoint,
};

/// One JSON document shared by all subcommands; every section optional.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub space: Option<MetricSpaceDescriptor>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<SampleWindow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cost: Option<CostDescriptor>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub structure: Option<QuadrupleStructure>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entropy: Option<EntropySection>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentSection {
    pub n_grid: Vec<usize>,
    pub replications: usize,
    pub seed: u64,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distribution: Option<DistributionSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loss: Option<DistanceKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub known_m: Option<SpacePoint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimator: Option<EstimatorConfig>,
}

fn default_kappa() -> f64 {
    2.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EntropySection {
    pub delta_grid: Vec<f64>,
    pub r_grid: Vec<f64>,
    pub model: frechet_core::entropy::EntropyModel,
}

impl RunConfig {
    pub fn load(path: &std::path::Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// Named space presets accepted anywhere a space is needed.
pub fn space_preset(name: &str) -> Result<(MetricSpaceDescriptor, Option<SampleWindow>)> {
    match name {
        "tripod" => Ok((MetricSpaceDescriptor::tripod(), None)),
        "tree8" => Ok((
            MetricSpaceDescriptor::tree(MetricTree::random(8, 0xf1ec8e7)),
            None,
        )),
        "unit_square" => Ok((
            MetricSpaceDescriptor::euclidean(2),
            Some(SampleWindow::unit(2)),
        )),
        "plane_hole" => Ok((
            MetricSpaceDescriptor::plane_with_hole(Hole::Disc {
                center: [0.0, 0.0],
                radius: 1.0,
            })?,
            None,
        )),
        _ => {
            if let Some(dim) = name.strip_prefix('r') {
                let dim: usize = dim
                    .parse()
                    .map_err(|_| anyhow!("unknown space preset {name}"))?;
                if dim == 0 || dim > 16 {
                    bail!("euclidean preset dimension must be 1..=16");
                }
                return Ok((MetricSpaceDescriptor::euclidean(dim), None));
            }
            bail!(
                "unknown space preset {name}; use tripod, tree8, unit_square, plane_hole, or rN"
            )
        }
    }
}

/// Named structure presets: `nice`, `ip`, `wip`, `bregman_exp`, `bregman_sq`,
/// `bounded_lipschitz[:D]`, `power:ALPHA`.
pub fn structure_preset(name: &str, space: &MetricSpaceDescriptor) -> Result<QuadrupleStructure> {
    let (head, arg) = match name.split_once(':') {
        Some((h, a)) => (h, Some(a)),
        None => (name, None),
    };
    let parse_arg = |what: &str| -> Result<f64> {
        arg.ok_or_else(|| anyhow!("{head} needs :{what}"))?
            .parse::<f64>()
            .map_err(|_| anyhow!("bad {what} in {name}"))
    };
    match head {
        "nice" => Ok(QuadrupleStructure::Nice),
        "ip" => Ok(QuadrupleStructure::InnerProduct),
        "wip" => {
            let dim = space
                .vector_dim()
                .ok_or_else(|| anyhow!("wip needs a vector space"))?;
            Ok(QuadrupleStructure::WeightedInnerProduct {
                weights: (0..dim).map(|k| 2f64.powi(k as i32 - 1)).collect(),
            })
        }
        "bregman_exp" => Ok(QuadrupleStructure::Bregman {
            psi: BregmanGenerator::CoordinateExponential,
        }),
        "bregman_sq" => Ok(QuadrupleStructure::Bregman {
            psi: BregmanGenerator::SquaredNorm,
        }),
        "bounded_lipschitz" => Ok(QuadrupleStructure::BoundedLipschitz {
            diam: match arg {
                Some(_) => parse_arg("diameter")?,
                None => 2f64.sqrt(),
            },
        }),
        "power" => Ok(QuadrupleStructure::Power {
            alpha: parse_arg("alpha")?,
        }),
        _ => bail!(
            "unknown structure preset {name}; use nice, ip, wip, bregman_exp, bregman_sq, \
             bounded_lipschitz[:D], power:ALPHA"
        ),
    }
}

/// Cost presets: `squared`, `median`, `power:TWO_ALPHA`, `bregman_exp`.
pub fn cost_preset(name: &str) -> Result<CostDescriptor> {
    match name.split_once(':') {
        None => match name {
            "squared" => Ok(CostDescriptor::SquaredDistance),
            "median" => Ok(CostDescriptor::PowerCost { two_alpha: 1.0 }),
            "bregman_exp" => Ok(CostDescriptor::Bregman {
                psi: BregmanGenerator::CoordinateExponential,
            }),
            _ => bail!("unknown cost preset {name}; use squared, median, power:TWO_ALPHA, bregman_exp"),
        },
        Some(("power", a)) => Ok(CostDescriptor::PowerCost {
            two_alpha: a.parse().map_err(|_| anyhow!("bad exponent in {name}"))?,
        }),
        _ => bail!("unknown cost preset {name}"),
    }
}

/// FNV-1a 64 over the canonical JSON of the resolved configuration.
pub fn config_hash(value: &impl Serialize) -> String {
    let text = serde_json::to_string(value).expect("config serializes");
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.as_bytes() {
        hash ^= *b as u64;
        hash = hash.wrapping_mul(0x1000_0000_01b3);
    }
    format!("{hash:016x}")
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest<'a, C: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: &'a str,
    pub seed: u64,
    pub config_hash: String,
    pub config: C,
}

/// Writes `manifest.json` describing a run; re-running with the same
/// manifest reproduces the deterministic outputs byte for byte.
pub fn write_manifest<C: Serialize>(
    out_dir: &std::path::Path,
    subcommand: &str,
    seed: u64,
    config: C,
) -> Result<()> {
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output dir {}", out_dir.display()))?;
    let manifest = Manifest {
        tool: "frechet",
        version: env!("CARGO_PKG_VERSION"),
        subcommand,
        seed,
        config_hash: config_hash(&config),
        config,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(out_dir.join("manifest.json"), text + "\n")
        .with_context(|| "writing manifest.json")?;
    Ok(())
}
