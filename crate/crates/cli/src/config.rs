//! Scenario files: a flat TOML document with `[problem]`, `[graph]`,
//! `[steps]` and `[run]` sections. Costs and starting points are either
//! sampled from seeded generators or written out explicitly; graphs come
//! from one of the three generator families or an explicit adjacency list.

use pushpull::graph::{Digraph, DigraphSequence};
use pushpull::problem::{ConstraintSet, ProblemInstance, QuadraticCost};
use pushpull::protocol::{PhiMode, StepSizes};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config field `{field}`: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    problem: ProblemSection,
    graph: GraphSection,
    steps: StepsSection,
    run: RunSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemSection {
    agents: usize,
    dimension: usize,
    seed: Option<u64>,
    center_range: Option<[f64; 2]>,
    curvature_range: Option<[f64; 2]>,
    costs: Option<Vec<CostSpec>>,
    constraint: ConstraintSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CostSpec {
    center: Vec<f64>,
    curvature: Vec<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstraintSection {
    kind: String,
    center: Option<Vec<f64>>,
    radius: Option<f64>,
    normal: Option<Vec<f64>>,
    offset: Option<f64>,
    lower: Option<Vec<f64>>,
    upper: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphSection {
    family: String,
    period: Option<usize>,
    edge_probability: Option<f64>,
    seed: Option<u64>,
    adjacency: Option<Vec<Vec<Vec<usize>>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct StepsSection {
    eta: f64,
    lambda: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunSection {
    rounds: usize,
    init_seed: Option<u64>,
    init_range: Option<[f64; 2]>,
    x0: Option<Vec<Vec<f64>>>,
    phi_mode: Option<String>,
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub rounds: Option<usize>,
    /// Replaces every seed in the file: costs use `seed`, graphs `seed + 1`,
    /// starting points `seed + 2`.
    pub seed: Option<u64>,
    pub phi_mode: Option<PhiMode>,
}

/// A fully validated, ready-to-run scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub problem: ProblemInstance,
    pub graphs: DigraphSequence,
    pub sizes: StepSizes,
    pub rounds: usize,
    pub phi_mode: PhiMode,
    pub x0: Vec<Vec<f64>>,
}

pub fn load_scenario(path: &str, overrides: Overrides) -> Result<Scenario, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_string(),
        source,
    })?;
    scenario_from_str(&text, overrides)
}

pub fn scenario_from_str(text: &str, overrides: Overrides) -> Result<Scenario, ConfigError> {
    let file: ConfigFile = toml::from_str(text)?;
    build(file, overrides)
}

fn build(file: ConfigFile, overrides: Overrides) -> Result<Scenario, ConfigError> {
    let n = file.problem.agents;
    let d = file.problem.dimension;
    if n == 0 {
        return Err(invalid("problem.agents", "must be at least 1"));
    }
    if d == 0 {
        return Err(invalid("problem.dimension", "must be at least 1"));
    }

    let constraint = build_constraint(&file.problem.constraint, d)?;
    let costs = build_costs(&file.problem, n, d, overrides.seed)?;
    let problem =
        ProblemInstance::new(costs, constraint).map_err(|e| invalid("problem", e.to_string()))?;

    let graphs = build_graphs(&file.graph, n, overrides.seed)?;

    let sizes = StepSizes::new(file.steps.eta, file.steps.lambda)
        .map_err(|e| invalid("steps", e.to_string()))?;

    let rounds = overrides.rounds.unwrap_or(file.run.rounds);
    if rounds == 0 {
        return Err(invalid("run.rounds", "must be at least 1"));
    }

    let phi_mode = match overrides.phi_mode {
        Some(mode) => mode,
        None => match file.run.phi_mode.as_deref().unwrap_or("uniform") {
            "uniform" => PhiMode::Uniform,
            "true" => PhiMode::Periodic,
            other => {
                return Err(invalid(
                    "run.phi_mode",
                    format!("expected `uniform` or `true`, got `{other}`"),
                ))
            }
        },
    };

    let x0 = build_start(&file.run, &problem, n, d, overrides.seed)?;

    Ok(Scenario {
        problem,
        graphs,
        sizes,
        rounds,
        phi_mode,
        x0,
    })
}

fn build_constraint(section: &ConstraintSection, d: usize) -> Result<ConstraintSet, ConfigError> {
    let field = "problem.constraint";
    let want_dim = |v: &[f64], name: &str| -> Result<(), ConfigError> {
        if v.len() != d {
            Err(invalid(
                name,
                format!("expected {d} entries, got {}", v.len()),
            ))
        } else {
            Ok(())
        }
    };
    match section.kind.as_str() {
        "whole-space" => Ok(ConstraintSet::whole_space(d)),
        "ball" => {
            let center = section
                .center
                .clone()
                .ok_or_else(|| invalid(field, "ball needs `center`"))?;
            want_dim(&center, "problem.constraint.center")?;
            let radius = section
                .radius
                .ok_or_else(|| invalid(field, "ball needs `radius`"))?;
            ConstraintSet::ball(center, radius).map_err(|e| invalid(field, e.to_string()))
        }
        "halfspace" => {
            let normal = section
                .normal
                .clone()
                .ok_or_else(|| invalid(field, "halfspace needs `normal`"))?;
            want_dim(&normal, "problem.constraint.normal")?;
            let offset = section
                .offset
                .ok_or_else(|| invalid(field, "halfspace needs `offset`"))?;
            ConstraintSet::halfspace(normal, offset).map_err(|e| invalid(field, e.to_string()))
        }
        "box" => {
            let lower = section
                .lower
                .clone()
                .ok_or_else(|| invalid(field, "box needs `lower`"))?;
            let upper = section
                .upper
                .clone()
                .ok_or_else(|| invalid(field, "box needs `upper`"))?;
            want_dim(&lower, "problem.constraint.lower")?;
            want_dim(&upper, "problem.constraint.upper")?;
            ConstraintSet::bounding_box(lower, upper).map_err(|e| invalid(field, e.to_string()))
        }
        other => Err(invalid(
            field,
            format!("unknown kind `{other}`, expected whole-space | ball | halfspace | box"),
        )),
    }
}

fn build_costs(
    section: &ProblemSection,
    n: usize,
    d: usize,
    seed_override: Option<u64>,
) -> Result<Vec<QuadraticCost>, ConfigError> {
    if let Some(specs) = &section.costs {
        if specs.len() != n {
            return Err(invalid(
                "problem.costs",
                format!("expected {n} costs, got {}", specs.len()),
            ));
        }
        return specs
            .iter()
            .enumerate()
            .map(|(i, spec)| {
                if spec.center.len() != d || spec.curvature.len() != d {
                    return Err(invalid(
                        "problem.costs",
                        format!("cost {i} does not match dimension {d}"),
                    ));
                }
                let m = pushpull::linalg::Matrix::from_rows(&spec.curvature);
                QuadraticCost::new(spec.center.clone(), m)
                    .map_err(|e| invalid("problem.costs", format!("cost {i}: {e}")))
            })
            .collect();
    }

    let seed = seed_override
        .or(section.seed)
        .ok_or_else(|| invalid("problem.seed", "required when costs are sampled"))?;
    let [center_lo, center_hi] = section.center_range.unwrap_or([-2.0, 8.0]);
    let [curv_lo, curv_hi] = section.curvature_range.unwrap_or([0.0, 1.0]);
    if !(center_lo < center_hi) {
        return Err(invalid("problem.center_range", "needs low < high"));
    }
    if !(curv_lo >= 0.0 && curv_lo < curv_hi) {
        return Err(invalid("problem.curvature_range", "needs 0 <= low < high"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // per agent: center coordinates first, then diagonal curvature entries
    Ok((0..n)
        .map(|_| {
            let center: Vec<f64> = (0..d)
                .map(|_| rng.gen_range(center_lo..center_hi))
                .collect();
            let diag: Vec<f64> = (0..d)
                .map(|_| loop {
                    let v = rng.gen_range(curv_lo..curv_hi);
                    // open-interval guard: curvature must be positive definite
                    if v > 0.0 {
                        break v;
                    }
                })
                .collect();
            QuadraticCost::diagonal(center, &diag).expect("sampled curvature is positive")
        })
        .collect())
}

fn build_graphs(
    section: &GraphSection,
    n: usize,
    seed_override: Option<u64>,
) -> Result<DigraphSequence, ConfigError> {
    let period = section.period.unwrap_or(1);
    if period == 0 {
        return Err(invalid("graph.period", "must be at least 1"));
    }
    let seed = seed_override.map(|s| s + 1).or(section.seed);
    let need_seed = || seed.ok_or_else(|| invalid("graph.seed", "required for this family"));
    let graphs: Vec<Digraph> = match section.family.as_str() {
        "random" => {
            let p = section
                .edge_probability
                .ok_or_else(|| invalid("graph.edge_probability", "required for random graphs"))?;
            let base = need_seed()?;
            (0..period)
                .map(|i| {
                    Digraph::random(n, p, base + i as u64)
                        .map_err(|e| invalid("graph", e.to_string()))
                })
                .collect::<Result<_, _>>()?
        }
        "cycle" => {
            let g = Digraph::cycle(n).map_err(|e| invalid("graph", e.to_string()))?;
            vec![g; period]
        }
        "unbalanced" => {
            let base = need_seed()?;
            (0..period)
                .map(|i| {
                    Digraph::unbalanced(n, base + i as u64)
                        .map_err(|e| invalid("graph", e.to_string()))
                })
                .collect::<Result<_, _>>()?
        }
        "explicit" => {
            let lists = section
                .adjacency
                .as_ref()
                .ok_or_else(|| invalid("graph.adjacency", "required for explicit graphs"))?;
            lists
                .iter()
                .enumerate()
                .map(|(gi, adj)| {
                    if adj.len() != n {
                        return Err(invalid(
                            "graph.adjacency",
                            format!("graph {gi} lists {} nodes, expected {n}", adj.len()),
                        ));
                    }
                    let edges: Vec<(usize, usize)> = adj
                        .iter()
                        .enumerate()
                        .flat_map(|(i, outs)| outs.iter().map(move |&j| (i, j)))
                        .collect();
                    Digraph::new(n, &edges)
                        .map_err(|e| invalid("graph.adjacency", format!("graph {gi}: {e}")))
                })
                .collect::<Result<_, _>>()?
        }
        other => {
            return Err(invalid(
                "graph.family",
                format!(
                    "unknown family `{other}`, expected random | cycle | unbalanced | explicit"
                ),
            ))
        }
    };
    DigraphSequence::new(graphs).map_err(|e| invalid("graph", e.to_string()))
}

fn build_start(
    section: &RunSection,
    problem: &ProblemInstance,
    n: usize,
    d: usize,
    seed_override: Option<u64>,
) -> Result<Vec<Vec<f64>>, ConfigError> {
    if let Some(points) = &section.x0 {
        if points.len() != n || points.iter().any(|p| p.len() != d) {
            return Err(invalid(
                "run.x0",
                format!("expected {n} points of dimension {d}"),
            ));
        }
        return Ok(points.clone());
    }
    let seed = seed_override
        .map(|s| s + 2)
        .or(section.init_seed)
        .ok_or_else(|| invalid("run.init_seed", "required when x0 is sampled"))?;
    let [lo, hi] = section.init_range.unwrap_or([0.0, 10.0]);
    if !(lo < hi) {
        return Err(invalid("run.init_range", "needs low < high"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // sample each coordinate, then project onto the constraint set
    Ok((0..n)
        .map(|_| {
            let raw: Vec<f64> = (0..d).map(|_| rng.gen_range(lo..hi)).collect();
            problem.constraint().project(&raw)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [problem]
        agents = 3
        dimension = 2
        seed = 5

        [problem.constraint]
        kind = "ball"
        center = [6.0, 6.0]
        radius = 2.0

        [graph]
        family = "cycle"

        [steps]
        eta = 0.5
        lambda = 0.6

        [run]
        rounds = 100
        init_seed = 9
    "#;

    #[test]
    fn minimal_scenario_builds() {
        let s = scenario_from_str(MINIMAL, Overrides::default()).unwrap();
        assert_eq!(s.problem.agent_count(), 3);
        assert_eq!(s.graphs.period(), 1);
        assert_eq!(s.rounds, 100);
        assert_eq!(s.phi_mode, PhiMode::Uniform);
        for p in &s.x0 {
            assert!(s.problem.constraint().membership_residual(p) <= 1e-12);
        }
    }

    #[test]
    fn overrides_replace_rounds_and_seeds() {
        let o = Overrides {
            rounds: Some(7),
            seed: Some(99),
            phi_mode: Some(PhiMode::Periodic),
        };
        let s = scenario_from_str(MINIMAL, o).unwrap();
        assert_eq!(s.rounds, 7);
        assert_eq!(s.phi_mode, PhiMode::Periodic);
        let baseline = scenario_from_str(MINIMAL, Overrides::default()).unwrap();
        assert_ne!(s.x0, baseline.x0);
    }

    #[test]
    fn zero_lambda_is_rejected() {
        let text = MINIMAL.replace("lambda = 0.6", "lambda = 0.0");
        let err = scenario_from_str(&text, Overrides::default()).unwrap_err();
        assert!(matches!(err, ConfigError::Invalid { ref field, .. } if field == "steps"));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = format!("{MINIMAL}\n[extra]\nx = 1\n");
        assert!(matches!(
            scenario_from_str(&text, Overrides::default()),
            Err(ConfigError::Parse(_))
        ));
    }

    #[test]
    fn explicit_costs_and_start_points() {
        let text = r#"
            [problem]
            agents = 2
            dimension = 1

            [[problem.costs]]
            center = [0.0]
            curvature = [[0.375]]

            [[problem.costs]]
            center = [0.0]
            curvature = [[0.125]]

            [problem.constraint]
            kind = "halfspace"
            normal = [1.0]
            offset = 1.0

            [graph]
            family = "explicit"
            adjacency = [[[1], [0]]]

            [steps]
            eta = 0.5
            lambda = 1.0

            [run]
            rounds = 1
            x0 = [[1.6], [1.6]]
        "#;
        let s = scenario_from_str(text, Overrides::default()).unwrap();
        assert_eq!(s.problem.agent_count(), 2);
        assert_eq!(s.x0, vec![vec![1.6], vec![1.6]]);
        assert!((s.problem.lipschitz() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn sampled_costs_deterministic_per_seed() {
        let a = scenario_from_str(MINIMAL, Overrides::default()).unwrap();
        let b = scenario_from_str(MINIMAL, Overrides::default()).unwrap();
        for (ca, cb) in a.problem.costs().iter().zip(b.problem.costs()) {
            assert_eq!(ca.center(), cb.center());
        }
    }
}
