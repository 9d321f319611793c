//! Implementations of the subcommands. Each returns the text to print.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sklar_core::extremal::{maximize_convex, ExtremalConfig, Functional};
use sklar_core::projective::{all_subsets, check_consistency};
use sklar_core::sklar::{compose as compose_joint, decompose as decompose_joint};
use sklar_core::topology::{compactness_probe, fdd_distance, transport_distance};
use sklar_core::{
    CheckerboardCopula, FamilyKind, FddMetricConfig, IndexUniverse, Label, Marginal,
    MarginalKind, ProjectiveFamily, TensorMeasure, MASS_TOL,
};

use crate::format::{self, Dec, Document};
use crate::{sig12, CliError, FunctionalName, Output, Pattern};

pub fn read_document(path: &Path) -> Result<Document, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    Document::parse(&text).map_err(|e| match e {
        CliError::Parse(m) => CliError::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn write_or_print(doc: &Document, out: Option<&Path>, report: String) -> Result<Output, CliError> {
    match out {
        Some(p) => {
            fs::write(p, doc.to_json())
                .map_err(|e| CliError::Parse(format!("cannot write {}: {e}", p.display())))?;
            Ok(Output {
                stdout: report,
                stderr: String::new(),
            })
        }
        None => Ok(Output {
            stdout: doc.to_json(),
            stderr: report,
        }),
    }
}

fn json_line<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string(v).expect("reports serialize");
    s.push('\n');
    s
}

fn stdout(s: String) -> Output {
    Output {
        stdout: s,
        stderr: String::new(),
    }
}

pub fn validate(path: &Path) -> Result<Output, CliError> {
    let line = match read_document(path)? {
        Document::Marginal(d) => {
            let m = format::marginal_from(&d.body())?;
            format!("pass: {:?} marginal\n", m.kind()).to_lowercase()
        }
        Document::MarginalSet(d) => {
            for (l, b) in &d.marginals {
                format::marginal_from(b)
                    .map_err(|e| CliError::Validation(format!("marginal {l}: {e}")))?;
            }
            format!("pass: {} marginals\n", d.marginals.len())
        }
        Document::Tensor(d) => {
            let t = format::tensor_from(&d.body())?;
            format!("pass: tensor measure over {:?}\n", t.labels())
        }
        Document::Copula(d) => {
            let c = format::copula_from(&d.body())?;
            let report = c.validate();
            if !report.passed() {
                return Err(CliError::Validation(report.to_string()));
            }
            format!("pass: order-{} copula over {:?}\n", c.order(), c.labels())
        }
        Document::Family(d) => {
            let family = d.build()?;
            let depth = d.depth.unwrap_or(3);
            let labels = family.universe().prefix(depth);
            let subsets = all_subsets(&labels);
            let report = check_consistency(&family, &subsets, MASS_TOL);
            if let Some((j, e)) = report.member_errors.first() {
                return Err(CliError::Validation(format!("member {j:?}: {e}")));
            }
            if let Some(v) = report.violations.first() {
                return Err(CliError::Validation(format!(
                    "{} inconsistent pairs; first: projecting {:?} onto {:?} is off by {:e}",
                    report.violations.len(),
                    v.sup,
                    v.sub,
                    v.deviation
                )));
            }
            format!(
                "pass: family over {:?}, {} subsets, {} pairs, max deviation {}\n",
                labels,
                subsets.len(),
                report.pairs_checked,
                sig12(report.max_deviation)
            )
        }
    };
    Ok(stdout(line))
}

fn read_marginals(path: &Path) -> Result<BTreeMap<Label, Marginal>, CliError> {
    match read_document(path)? {
        Document::MarginalSet(d) => d
            .marginals
            .iter()
            .map(|(&l, b)| Ok((l, format::marginal_from(b)?)))
            .collect(),
        // a lone marginal is read as the marginal of label 0
        Document::Marginal(d) => Ok([(0, format::marginal_from(&d.body())?)].into_iter().collect()),
        other => Err(CliError::Compatibility(format!(
            "{}: expected marginal_set or marginal, found {}",
            path.display(),
            other.kind()
        ))),
    }
}

fn read_copula_family(path: &Path) -> Result<(ProjectiveFamily, Option<usize>), CliError> {
    match read_document(path)? {
        Document::Copula(d) => {
            let c = format::valid_copula_from(&d.body())?;
            let n = c.order();
            Ok((ProjectiveFamily::from_copula(c), Some(n)))
        }
        Document::Family(d) => {
            let f = d.build()?;
            if f.kind() != FamilyKind::Copula {
                return Err(CliError::Compatibility(format!(
                    "{}: rule {:?} does not describe a copula family",
                    path.display(),
                    d.rule
                )));
            }
            let n = d.order.or(d.copula.as_ref().map(|c| c.order));
            Ok((f, n))
        }
        other => Err(CliError::Compatibility(format!(
            "{}: expected checkerboard_copula or family_spec, found {}",
            path.display(),
            other.kind()
        ))),
    }
}

#[derive(Serialize)]
struct ComposeReport {
    labels: Vec<Label>,
    atoms: usize,
    probes: usize,
    max_deviation: f64,
}

pub fn compose(
    copula: &Path,
    marginals: &Path,
    subset: Option<&[Label]>,
    out: Option<&Path>,
) -> Result<Output, CliError> {
    let (family, order) = read_copula_family(copula)?;
    let mut ms = read_marginals(marginals)?;
    if let IndexUniverse::Finite(labels) = family.universe() {
        // a lone marginal matches a one-dimensional copula whatever its label
        if labels.len() == 1 && ms.len() == 1 && !ms.contains_key(&labels[0]) {
            let m = ms.pop_first().expect("one marginal").1;
            ms.insert(labels[0], m);
        }
        let have: Vec<Label> = ms.keys().copied().collect();
        if have != *labels {
            return Err(CliError::Compatibility(format!(
                "copula labels {labels:?} but marginals for {have:?}"
            )));
        }
    }
    let j: Vec<Label> = match (subset, family.universe()) {
        (Some(j), _) => {
            let mut j = j.to_vec();
            j.sort_unstable();
            j.dedup();
            j
        }
        (None, IndexUniverse::Finite(labels)) => labels.clone(),
        (None, IndexUniverse::Countable) => {
            return Err(CliError::Compatibility(
                "a countable family needs --subset".into(),
            ))
        }
    };
    if j.is_empty() {
        return Err(CliError::Compatibility("empty subset".into()));
    }
    if let Some(l) = j.iter().find(|l| !family.universe().contains(**l) || !ms.contains_key(l)) {
        return Err(CliError::Compatibility(format!(
            "label {l} is not covered by both the copula and the marginals"
        )));
    }
    let n = order.unwrap_or(1);
    let joint = compose_joint(Arc::new(family), ms)?.with_quantile_grids(n);
    let t = joint.discretize(&j)?;
    let probes = joint.support_probes(&j)?;
    let report = joint.verify(&j, &probes)?;
    let line = json_line(&ComposeReport {
        labels: j,
        atoms: t.support().len(),
        probes: report.probes,
        max_deviation: report.max_deviation,
    });
    write_or_print(&format::tensor_doc(&t), out, line)
}

#[derive(Serialize)]
struct DecomposeReport {
    labels: Vec<Label>,
    order: usize,
    round_trip_deviation: f64,
}

pub fn decompose(
    joint: &Path,
    marginals: &Path,
    order: usize,
    out: Option<&Path>,
) -> Result<Output, CliError> {
    let t = match read_document(joint)? {
        Document::Tensor(d) => format::tensor_from(&d.body())?,
        other => {
            return Err(CliError::Compatibility(format!(
                "{}: expected tensor_measure, found {}",
                joint.display(),
                other.kind()
            )))
        }
    };
    let ms = read_marginals(marginals)?;
    let have: Vec<Label> = ms.keys().copied().collect();
    if have != t.labels() {
        return Err(CliError::Compatibility(format!(
            "joint labels {:?} but marginals for {have:?}",
            t.labels()
        )));
    }
    if let Some((l, _)) = ms.iter().find(|(_, m)| m.kind() == MarginalKind::Atomic) {
        return Err(CliError::Unsupported(format!(
            "marginal {l} is atomic. With atoms, many copulas give the same joint \
             (they only have to agree on the range of the marginal CDFs), so no unique \
             copula can be recovered; supply continuous marginals"
        )));
    }
    let c = decompose_joint(&t, &ms, order)?;
    let mut back = compose_joint(Arc::new(ProjectiveFamily::from_copula(c.clone())), ms)?;
    for (a, &l) in t.labels().iter().enumerate() {
        back = back.with_grid(l, t.grid().axis(a).to_vec())?;
    }
    let deviation = back.discretize(t.labels())?.max_abs_diff(&t)?;
    let line = json_line(&DecomposeReport {
        labels: t.labels().to_vec(),
        order,
        round_trip_deviation: deviation,
    });
    write_or_print(&format::copula_doc(&c), out, line)
}

fn read_measure(path: &Path) -> Result<TensorMeasure, CliError> {
    match read_document(path)? {
        Document::Tensor(d) => format::tensor_from(&d.body()),
        Document::Marginal(d) => Ok(TensorMeasure::from_marginal(0, &format::marginal_from(&d.body())?)?),
        Document::Copula(d) => Ok(format::valid_copula_from(&d.body())?.to_tensor_measure()),
        other => Err(CliError::Compatibility(format!(
            "{}: a {} is not a single measure; use --fdd for families",
            path.display(),
            other.kind()
        ))),
    }
}

fn read_family(path: &Path) -> Result<ProjectiveFamily, CliError> {
    match read_document(path)? {
        Document::Family(d) => d.build(),
        Document::Copula(d) => Ok(ProjectiveFamily::from_copula(format::valid_copula_from(&d.body())?)),
        Document::Tensor(d) => Ok(ProjectiveFamily::from_joint(format::tensor_from(&d.body())?)),
        other => Err(CliError::Compatibility(format!(
            "{}: a {} does not describe a family",
            path.display(),
            other.kind()
        ))),
    }
}

pub fn distance(a: &Path, b: &Path, fdd: bool, depth: usize) -> Result<Output, CliError> {
    let d = if fdd {
        let (f, g) = (read_family(a)?, read_family(b)?);
        if f.universe() != g.universe() {
            return Err(CliError::Compatibility(format!(
                "families live on {:?} and {:?}",
                f.universe(),
                g.universe()
            )));
        }
        if depth == 0 {
            return Err(CliError::Validation("--depth must be at least 1".into()));
        }
        fdd_distance(&f, &g, FddMetricConfig { depth })?
    } else {
        let (x, y) = (read_measure(a)?, read_measure(b)?);
        if x.labels() != y.labels() {
            return Err(CliError::Compatibility(format!(
                "measures over {:?} and {:?}",
                x.labels(),
                y.labels()
            )));
        }
        transport_distance(&x, &y)?
    };
    Ok(stdout(format!("{}\n", sig12(d))))
}

/// The sequence used by `compact-demo`.
pub fn demo_sequence(
    count: usize,
    order: usize,
    eps: f64,
    seed: u64,
    pattern: Pattern,
) -> Result<Vec<CheckerboardCopula>, CliError> {
    let labels = [0, 1];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(match pattern {
        Pattern::Constant => {
            let c = CheckerboardCopula::random(&labels, order, &mut rng)?;
            vec![c; count]
        }
        Pattern::Alternating => {
            let a = CheckerboardCopula::independence(&labels, order)?;
            let b = CheckerboardCopula::comonotone(&labels, order)?;
            (0..count).map(|i| if i % 2 == 0 { a.clone() } else { b.clone() }).collect()
        }
        Pattern::Clusters => {
            let centers = [
                CheckerboardCopula::independence(&labels, order)?,
                CheckerboardCopula::comonotone(&labels, order)?,
                CheckerboardCopula::countermonotone(&labels, order)?,
            ];
            let mut seq = Vec::with_capacity(count);
            for _ in 0..count {
                let center = &centers[rng.random_range(0..centers.len())];
                let r = CheckerboardCopula::random(&labels, order, &mut rng)?;
                let spread = center.max_norm_diff(&r)?;
                // moves every cell by at most 0.45 eps
                let t = if spread > 0.0 { (0.45 * eps / spread).min(1.0) } else { 0.0 };
                seq.push(center.mix(&r, t)?);
            }
            seq
        }
    })
}

#[derive(Serialize)]
struct CompactReport {
    pattern: &'static str,
    count: usize,
    order: usize,
    eps: f64,
    clusters: usize,
    length: usize,
    representative_index: usize,
    representative_valid: bool,
    indices: Vec<usize>,
}

pub fn compact_demo(
    count: usize,
    order: usize,
    eps: f64,
    seed: u64,
    pattern: Pattern,
) -> Result<Output, CliError> {
    if count == 0 || order == 0 {
        return Err(CliError::Validation("--count and --order must be at least 1".into()));
    }
    if !(eps.is_finite() && eps > 0.0) {
        return Err(CliError::Validation("--eps must be positive".into()));
    }
    let seq = demo_sequence(count, order, eps, seed, pattern)?;
    let probe = compactness_probe(&seq, eps)?;
    Ok(stdout(json_line(&CompactReport {
        pattern: match pattern {
            Pattern::Clusters => "clusters",
            Pattern::Constant => "constant",
            Pattern::Alternating => "alternating",
        },
        count,
        order,
        eps,
        clusters: probe.clusters,
        length: probe.indices.len(),
        representative_index: probe.indices[0],
        representative_valid: probe.representative.validate().passed(),
        indices: probe.indices,
    })))
}

/// Coefficients of the `linear` functional for a seed.
pub fn linear_coefficients(order: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_simple_fn((order, order), || rng.random_range(-1.0..1.0))
}

#[derive(Serialize)]
struct ExtremalOut {
    order: usize,
    functional: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    coefficients: Option<Vec<Vec<Dec>>>,
    extremal_best: f64,
    best_permutation: Vec<usize>,
    permutations_evaluated: usize,
    samples: usize,
    interior_best: Option<f64>,
    convexity_warnings: usize,
}

pub fn extremal(
    order: usize,
    name: FunctionalName,
    seed: u64,
    samples: usize,
    midpoint_checks: usize,
    value: f64,
) -> Result<Output, CliError> {
    let g = match name {
        FunctionalName::Linear => Functional::Linear(linear_coefficients(order, seed)),
        FunctionalName::MaxCell => Functional::MaxCell,
        FunctionalName::SumOfSquares => Functional::SumOfSquares,
        FunctionalName::Constant => Functional::Constant(value),
    };
    let cfg = ExtremalConfig {
        samples,
        seed,
        midpoint_checks,
    };
    let r = maximize_convex(&|c: &CheckerboardCopula| g.evaluate(c), order, cfg)?;
    let coefficients = match &g {
        Functional::Linear(c) => Some(c.rows().into_iter().map(|r| r.iter().map(|&v| Dec(v)).collect()).collect()),
        _ => None,
    };
    Ok(stdout(json_line(&ExtremalOut {
        order,
        functional: g.name(),
        coefficients,
        extremal_best: r.extremal_best,
        best_permutation: r.best_permutation,
        permutations_evaluated: r.permutations_evaluated,
        samples,
        interior_best: r.interior_best,
        convexity_warnings: r.convexity_warnings,
    })))
}
