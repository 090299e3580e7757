//! The subcommands. Each builds a serializable report; the text form is
//! rendered from the same report that `--json` prints.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use gradlin::analysis::{
    check_all_properties, reconstruct_degree2, recover_source_morphism, solve_inverse, source_weight,
    surjectivity_hypothesis, OperatorFamily, Property, PropertyReport, Status,
};
use gradlin::{lift_morphism, AdditionalSymbol, LinearizedChart, Weight, WeightSystem};
use serde::Serialize;

use crate::polytext::{parse_polynomial, parse_symbols, parse_weights};
use crate::random::Sampler;
use crate::sysfile::{self, ParseError, SystemFile};
use crate::table::Table;

#[derive(Clone, Copy, Debug, Default)]
pub struct Options {
    pub json: bool,
    pub trunc: Option<u32>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Library(#[from] gradlin::Error),
}

impl CliError {
    pub fn parse(source: &str, e: ParseError) -> Self {
        CliError::Parse(format!("{source}:{e}"))
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Library(_) => 1,
            _ => 2,
        }
    }
}

/// What a command prints and whether it succeeded.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub output: String,
    pub success: bool,
}

trait Report: Serialize {
    fn header(&self) -> &Header;
    fn body(&self) -> String;
    fn success(&self) -> bool;
}

#[derive(Clone, Debug, Serialize)]
pub struct Header {
    pub command: &'static str,
    pub trunc: u32,
}

fn finish<R: Report>(report: &R, opts: Options) -> Outcome {
    let output = if opts.json {
        let mut s = serde_json::to_string_pretty(report).expect("reports serialize");
        s.push('\n');
        s
    } else {
        let h = report.header();
        format!("# gradlin {} (trunc {})\n{}", h.command, h.trunc, report.body())
    };
    Outcome {
        output,
        success: report.success(),
    }
}

fn load(path: &str, text: &str) -> Result<SystemFile, CliError> {
    sysfile::parse(text).map_err(|e| CliError::parse(path, e))
}

fn set_text<'a>(ws: impl IntoIterator<Item = &'a Weight>) -> String {
    format!("{{{}}}", list(ws))
}

fn list<T: ToString>(items: impl IntoIterator<Item = T>) -> String {
    items.into_iter().map(|w| w.to_string()).collect::<Vec<_>>().join(", ")
}

fn strings<T: ToString>(items: impl IntoIterator<Item = T>) -> Vec<String> {
    items.into_iter().map(|w| w.to_string()).collect()
}

fn yes(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

#[derive(Serialize)]
pub struct ValidateReport {
    header: Header,
    valid: bool,
    rank: usize,
    multiplicity_free: bool,
    violated: Vec<u8>,
    summary: String,
    elements: Vec<String>,
}

impl Report for ValidateReport {
    fn header(&self) -> &Header {
        &self.header
    }

    fn body(&self) -> String {
        format!("{}\n", self.summary)
    }

    fn success(&self) -> bool {
        self.valid
    }
}

pub fn validate(path: &str, text: &str, opts: Options) -> Result<Outcome, CliError> {
    let input = load(path, text)?;
    let system = input.system()?;
    let v = system.validate();
    let report = ValidateReport {
        header: Header {
            command: "validate",
            trunc: input.trunc(opts.trunc),
        },
        valid: v.is_valid(),
        rank: v.rank,
        multiplicity_free: v.multiplicity_free,
        violated: v.violated(),
        summary: v.to_string(),
        elements: strings(system.elements()),
    };
    Ok(finish(&report, opts))
}

#[derive(Serialize)]
pub struct FiberRow {
    weight: String,
    fiber: Vec<String>,
}

#[derive(Serialize)]
pub struct GeneratorRow {
    generator: String,
    weight: String,
    source: String,
    source_weight: String,
    lifts: Vec<String>,
}

#[derive(Serialize)]
pub struct ImageRow {
    operator: String,
    generator: String,
    image: String,
}

#[derive(Serialize)]
pub struct ChartTables {
    generators: Vec<GeneratorRow>,
    operators: Vec<ImageRow>,
}

#[derive(Serialize)]
pub struct LinearizeReport {
    header: Header,
    system: Vec<String>,
    linearized: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fibers: Option<Vec<FiberRow>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    chart: Option<ChartTables>,
}

impl Report for LinearizeReport {
    fn header(&self) -> &Header {
        &self.header
    }

    fn body(&self) -> String {
        let mut out = format!(
            "system: {{{}}}\nlinearized: {{{}}}\n",
            self.system.join(", "),
            self.linearized.join(", ")
        );
        if let Some(fibers) = &self.fibers {
            let mut t = Table::new(["weight", "fiber"]);
            for r in fibers {
                t.row([r.weight.clone(), r.fiber.join(", ")]);
            }
            out.push('\n');
            out.push_str(&t.render());
        }
        if let Some(chart) = &self.chart {
            let mut t = Table::new(["generator", "weight", "source", "lifts"]);
            for r in &chart.generators {
                let lifts = if r.lifts.is_empty() {
                    "-".to_string()
                } else {
                    r.lifts.join(",")
                };
                t.row([r.generator.clone(), r.weight.clone(), r.source.clone(), lifts]);
            }
            out.push('\n');
            out.push_str(&t.render());
            out.push('\n');
            if chart.operators.is_empty() {
                out.push_str("no operators\n");
            } else {
                let mut t = Table::new(["operator", "generator", "image"]);
                for r in &chart.operators {
                    t.row([r.operator.clone(), r.generator.clone(), r.image.clone()]);
                }
                out.push_str(&t.render());
            }
        }
        out
    }

    fn success(&self) -> bool {
        true
    }
}

fn chart_tables(lc: &LinearizedChart) -> Result<ChartTables, CliError> {
    let generators = lc
        .coordinate_table()?
        .into_iter()
        .map(|e| GeneratorRow {
            generator: e.target.to_string(),
            weight: e.target_weight().to_string(),
            source: e.source.to_string(),
            source_weight: e.source_weight().to_string(),
            lifts: strings(&e.lifts),
        })
        .collect();
    let mut operators = Vec::new();
    for (b, d) in lc.operators() {
        for g in lc.chart().coordinates() {
            operators.push(ImageRow {
                operator: format!("D_{b}"),
                generator: g.to_string(),
                image: d.apply(&lc.chart().generator(g)).to_string(),
            });
        }
    }
    Ok(ChartTables { generators, operators })
}

pub fn linearize(path: &str, text: &str, fibers: bool, opts: Options) -> Result<Outcome, CliError> {
    let input = load(path, text)?;
    let system = input.system()?;
    let linearized = system.linearized()?;
    let fibers = if fibers {
        Some(
            system
                .elements()
                .iter()
                .map(|d| {
                    Ok(FiberRow {
                        weight: d.to_string(),
                        fiber: strings(system.fiber(d)?),
                    })
                })
                .collect::<Result<Vec<_>, CliError>>()?,
        )
    } else {
        None
    };
    let chart = match &input.chart {
        Some(_) => Some(chart_tables(&LinearizedChart::new(
            &input.chart_layout(opts.trunc)?.chart()?,
        )?)?),
        None => None,
    };
    let report = LinearizeReport {
        header: Header {
            command: "linearize",
            trunc: input.trunc(opts.trunc),
        },
        system: strings(system.elements()),
        linearized: strings(linearized.elements()),
        fibers,
        chart,
    };
    Ok(finish(&report, opts))
}

#[derive(Serialize)]
pub struct PropertyRow {
    number: u8,
    name: &'static str,
    instances: usize,
    passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    witness: Option<String>,
}

#[derive(Serialize)]
pub struct DecompositionRow {
    weight: String,
    dimension: usize,
    products: usize,
    kernel: usize,
    intersection: usize,
    spans: bool,
}

#[derive(Serialize)]
pub struct RandomRun {
    seed: u64,
    samples: usize,
    passed: usize,
    /// Chart dimensions of the first failing sample, by weight.
    #[serde(skip_serializing_if = "Option::is_none")]
    first_failure: Option<String>,
}

#[derive(Serialize)]
pub struct CheckReport {
    header: Header,
    properties: Vec<PropertyRow>,
    decompositions: Vec<DecompositionRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    random: Option<RandomRun>,
}

impl Report for CheckReport {
    fn header(&self) -> &Header {
        &self.header
    }

    fn body(&self) -> String {
        let mut t = Table::new(["property", "name", "instances", "status"]);
        for p in &self.properties {
            let status = if p.passed { "PASS" } else { "FAIL" };
            t.row([
                p.number.to_string(),
                p.name.to_string(),
                p.instances.to_string(),
                status.to_string(),
            ]);
        }
        let mut out = t.render();
        for p in &self.properties {
            if let Some(w) = &p.witness {
                let _ = writeln!(out, "witness for property {}: {w}", p.number);
            }
        }
        if !self.decompositions.is_empty() {
            let mut t = Table::new(["weight", "dimension", "products", "kernel", "intersection"]);
            for d in &self.decompositions {
                t.row([
                    d.weight.clone(),
                    d.dimension.to_string(),
                    d.products.to_string(),
                    d.kernel.to_string(),
                    d.intersection.to_string(),
                ]);
            }
            out.push('\n');
            out.push_str(&t.render());
        }
        if let Some(r) = &self.random {
            let _ = writeln!(
                out,
                "\nrandom charts (seed {}): {} of {} passed",
                r.seed, r.passed, r.samples
            );
            if let Some(f) = &r.first_failure {
                let _ = writeln!(out, "first failure: {f}");
            }
        }
        out
    }

    fn success(&self) -> bool {
        self.properties.iter().all(|p| p.passed) && self.random.as_ref().is_none_or(|r| r.passed == r.samples)
    }
}

fn property_rows(report: &PropertyReport) -> Vec<PropertyRow> {
    Property::ALL
        .iter()
        .map(|&p| {
            let o = report.outcome(p);
            PropertyRow {
                number: p.number(),
                name: p.name(),
                instances: o.instances,
                passed: o.passed(),
                witness: match &o.status {
                    Status::Pass => None,
                    Status::Fail(w) => Some(format!("{}: {}", w.context, w.polynomial)),
                },
            }
        })
        .collect()
}

pub fn check(path: &str, text: &str, seed: Option<u64>, samples: usize, opts: Options) -> Result<Outcome, CliError> {
    let input = load(path, text)?;
    let trunc = input.trunc(opts.trunc);
    let lc = LinearizedChart::new(&input.chart_layout(opts.trunc)?.chart()?)?;
    let report = check_all_properties(&OperatorFamily::from(&lc), trunc)?;
    let random = match seed {
        Some(seed) => {
            let system = input.system()?;
            let mut sampler = Sampler::new(seed);
            let mut passed = 0;
            let mut first_failure = None;
            for _ in 0..samples {
                let cs = sampler.chart_layout(&system, 2, trunc);
                let lc = LinearizedChart::new(&cs.chart()?)?;
                if check_all_properties(&OperatorFamily::from(&lc), trunc)?.passed() {
                    passed += 1;
                } else if first_failure.is_none() {
                    let dims: Vec<String> = cs.chart()?.dims().iter().map(|(w, d)| format!("{w}:{d}")).collect();
                    first_failure = Some(dims.join(" "));
                }
            }
            Some(RandomRun {
                seed,
                samples,
                passed,
                first_failure,
            })
        }
        None => None,
    };
    let report = CheckReport {
        header: Header {
            command: "check",
            trunc,
        },
        properties: property_rows(&report),
        decompositions: report
            .decompositions
            .iter()
            .map(|d| DecompositionRow {
                weight: d.weight.to_string(),
                dimension: d.dimension,
                products: d.products.len(),
                kernel: d.kernel.len(),
                intersection: d.intersection,
                spans: d.spans,
            })
            .collect(),
        random,
    };
    Ok(finish(&report, opts))
}

#[derive(Serialize)]
pub struct InvertReport {
    header: Header,
    lambda: Vec<String>,
    f: String,
    target_weight: String,
    source_weight: String,
    surjectivity_hypothesis: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    solution: Option<String>,
    on_source_chart: bool,
    verified: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

impl Report for InvertReport {
    fn header(&self) -> &Header {
        &self.header
    }

    fn body(&self) -> String {
        let mut out = format!(
            "lambda: {}\nf: {}\nweight: {} from {}\n",
            self.lambda.join(","),
            self.f,
            self.target_weight,
            self.source_weight
        );
        match (&self.solution, &self.error) {
            (Some(s), _) => {
                let chart = if self.on_source_chart { "source" } else { "quotient" };
                let _ = writeln!(out, "solution ({chart} chart): {s}");
                let _ = writeln!(out, "round trip: {}", if self.verified { "holds" } else { "fails" });
            }
            (None, Some(e)) => {
                let _ = writeln!(out, "error: {e}");
            }
            (None, None) => {}
        }
        out
    }

    fn success(&self) -> bool {
        self.verified
    }
}

pub fn invert(path: &str, text: &str, lambda: &str, f: &str, opts: Options) -> Result<Outcome, CliError> {
    let input = load(path, text)?;
    let lambda: Vec<AdditionalSymbol> = parse_symbols(lambda).map_err(|e| CliError::parse("--lambda", e))?;
    if lambda.is_empty() {
        return Err(CliError::Usage("--lambda needs at least one operator".into()));
    }
    let lc = LinearizedChart::new(&input.chart_layout(opts.trunc)?.chart()?)?;
    let f = parse_polynomial(f, lc.chart()).map_err(|e| CliError::parse("--f", e))?;
    let weights = f.weights();
    let target = match weights.len() {
        0 => Weight::zero(),
        1 => weights.into_iter().next().unwrap_or_default(),
        _ => return Err(gradlin::Error::NotHomogeneous.into()),
    };
    let (solution, error) = match solve_inverse(&lc, &lambda, &f) {
        Ok(s) => (Some(s), None),
        Err(e @ (gradlin::Error::KernelHypothesis | gradlin::Error::NoSolution | gradlin::Error::Hypothesis(_))) => {
            (None, Some(e.to_string()))
        }
        Err(e) => return Err(e.into()),
    };
    let verified = match &solution {
        Some(s) => {
            let mut back = s.clone();
            for &b in lambda.iter().rev() {
                back = lc.apply_reduced(b, &back)?;
            }
            back.with_trunc(f.trunc()) == f
        }
        None => false,
    };
    let source = source_weight(&lambda, &target);
    let report = InvertReport {
        header: Header {
            command: "invert",
            trunc: input.trunc(opts.trunc),
        },
        lambda: strings(&lambda),
        f: f.to_string(),
        target_weight: target.to_string(),
        surjectivity_hypothesis: surjectivity_hypothesis(&target),
        source_weight: source.to_string(),
        on_source_chart: solution.as_ref().is_some_and(|s| lc.source().owns(s)),
        solution: solution.map(|s| s.to_string()),
        verified,
        error,
    };
    Ok(finish(&report, opts))
}

#[derive(Serialize)]
pub struct DualizeReport {
    header: Header,
    system: Vec<String>,
    base: Vec<String>,
    direction: String,
    dual: Vec<String>,
    suggested_basis: Vec<String>,
    involution: bool,
}

impl Report for DualizeReport {
    fn header(&self) -> &Header {
        &self.header
    }

    fn body(&self) -> String {
        format!(
            "system: {{{}}}\nbase: {{{}}}\nfiber direction: {}\ndual: {{{}}}\nsuggested basis: {}\ninvolution: {}\n",
            self.system.join(", "),
            self.base.join(", "),
            self.direction,
            self.dual.join(", "),
            self.suggested_basis.join(", "),
            if self.involution { "holds" } else { "fails" }
        )
    }

    fn success(&self) -> bool {
        self.involution
    }
}

pub fn dualize(path: &str, text: &str, base: &str, opts: Options) -> Result<Outcome, CliError> {
    let input = load(path, text)?;
    let system = input.system()?;
    let base: BTreeSet<Weight> = parse_weights(base, input.rank())
        .map_err(|e| CliError::parse("--base", e))?
        .into_iter()
        .collect();
    let d = system.dualize(&base)?;
    let back: WeightSystem = d.system.dualize(&base)?.system;
    let report = DualizeReport {
        header: Header {
            command: "dualize",
            trunc: input.trunc(opts.trunc),
        },
        system: strings(system.elements()),
        base: strings(&base),
        direction: d.direction.to_string(),
        dual: strings(d.system.elements()),
        suggested_basis: strings(&d.suggested_basis),
        involution: back == system,
    };
    Ok(finish(&report, opts))
}

#[derive(Serialize)]
pub struct ReconstructReport {
    header: Header,
    kernel_dim: usize,
    rebuilt: Vec<String>,
    pullbacks: Vec<ImageRow>,
    source_pullbacks: Vec<ImageRow>,
    commutes: bool,
    linear_part_invertible: bool,
    bijective: Vec<(String, bool)>,
    lift_matches: bool,
}

impl Report for ReconstructReport {
    fn header(&self) -> &Header {
        &self.header
    }

    fn body(&self) -> String {
        let mut out = format!(
            "top-weight kernel dimension: {}\nrebuilt chart: {}\n\n",
            self.kernel_dim,
            self.rebuilt.join(", ")
        );
        for rows in [&self.pullbacks, &self.source_pullbacks] {
            let mut t = Table::new(["morphism", "generator", "pullback"]);
            for r in rows {
                t.row([r.operator.clone(), r.generator.clone(), r.image.clone()]);
            }
            out.push_str(&t.render());
            out.push('\n');
        }
        let _ = writeln!(out, "commutes with operators: {}", yes(self.commutes));
        let _ = writeln!(out, "linear part invertible: {}", yes(self.linear_part_invertible));
        let per_weight: Vec<String> = self.bijective.iter().map(|(w, b)| format!("{w} {}", yes(*b))).collect();
        let _ = writeln!(out, "bijective by weight: {}", per_weight.join(", "));
        let _ = writeln!(
            out,
            "recovered morphism lifts to the reconstruction: {}",
            yes(self.lift_matches)
        );
        out
    }

    fn success(&self) -> bool {
        self.commutes && self.linear_part_invertible && self.bijective.iter().all(|(_, b)| *b) && self.lift_matches
    }
}

/// Linearize a degree-2 chart, rebuild a degree-2 chart from the result and
/// compare both directions.
pub fn reconstruct(path: &str, text: &str, opts: Options) -> Result<Outcome, CliError> {
    let input = load(path, text)?;
    let system = input.system()?;
    let m2: BTreeSet<Weight> = [Weight::zero(), Weight::basic(1), Weight::basic(1).scale(2)].into();
    if input.rank() != 1 || *system.elements() != m2 {
        return Err(CliError::Usage(format!(
            "{path}: reconstruct needs the degree-2 system {{0, a1, 2a1}}, found {}",
            set_text(system.elements())
        )));
    }
    let lc = LinearizedChart::new(&input.chart_layout(opts.trunc)?.chart()?)?;
    let b = AdditionalSymbol::new(2, 1);
    let rec = reconstruct_degree2(lc.chart(), lc.operator(b)?)?;
    let psi = recover_source_morphism(&rec, &lc)?;
    let lifted = lift_morphism(&psi, &lc, &rec.linearized)?;
    let rows = |name: &str, m: &gradlin::ChartMorphism| -> Vec<ImageRow> {
        m.target()
            .coordinates()
            .iter()
            .map(|g| ImageRow {
                operator: name.to_string(),
                generator: g.to_string(),
                image: m.image(g).to_string(),
            })
            .collect()
    };
    let report = ReconstructReport {
        header: Header {
            command: "reconstruct",
            trunc: input.trunc(opts.trunc),
        },
        kernel_dim: rec.kernel_dim,
        rebuilt: strings(rec.linearized.source().coordinates()),
        pullbacks: rows("phi", &rec.morphism),
        source_pullbacks: rows("psi", &psi),
        commutes: rec.commutes,
        linear_part_invertible: rec.linear_part_invertible,
        bijective: rec.bijective.iter().map(|(w, b)| (w.to_string(), *b)).collect(),
        lift_matches: lifted.same_pullbacks(&rec.morphism),
    };
    Ok(finish(&report, opts))
}

#[cfg(test)]
mod tests {
    use super::*;

    const A2: &str = "rank 2; parities 0 0\n0,0\n1,0\n0,1\n1,1\n";
    const M3: &str = "rank 1; parities 1\n0\n1\n2\n3\n";
    const M2: &str = "rank 1; parities 1\n0\n1\n2\nchart\ndim 1 = 2\ndim 2 = 2\n";

    fn text() -> Options {
        Options::default()
    }

    #[test]
    fn validate_reports_conditions() {
        let o = validate("a2", A2, text()).unwrap();
        assert!(o.success);
        assert_eq!(
            o.output,
            "# gradlin validate (trunc 3)\nvalid, rank 2, multiplicity-free\n"
        );
        let o = validate("bad", "rank 1; parities 0\n1\n", text()).unwrap();
        assert!(!o.success);
        assert!(o.output.contains("condition 2 violated"));
        let e = validate("bad", "rank 1; parities 0\n0\nx\n", text()).unwrap_err();
        assert_eq!(e.to_string(), "bad:3:1: expected an integer coefficient, found `x`");
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn dualize_a2() {
        let o = dualize("a2", A2, "0,0;1,0", text()).unwrap();
        assert!(o.success);
        assert!(o.output.contains("dual: {-a1-a2, -a2, 0, a1}\n"), "{}", o.output);
    }

    #[test]
    fn check_m3_passes_and_json_matches_text() {
        let o = check("m3", M3, Some(1), 2, text()).unwrap();
        assert!(o.success, "{}", o.output);
        let j = check(
            "m3",
            M3,
            None,
            0,
            Options {
                json: true,
                trunc: None,
            },
        )
        .unwrap();
        let v: serde_json::Value = serde_json::from_str(&j.output).unwrap();
        assert_eq!(v["properties"].as_array().unwrap().len(), 6);
        assert_eq!(v["header"]["trunc"], 3);
    }

    #[test]
    fn invert_outside_kernel_fails() {
        let o = invert("m3", M3, "b2_1", "1 * xi<a1> * xi<a1>[b2_1]", text()).unwrap();
        assert!(!o.success);
        assert!(o.output.contains("kernel hypothesis violated"), "{}", o.output);
        let o = invert("m3", M3, "b2_1", "1 * xi<a1>[b2_1]", text()).unwrap();
        assert!(o.success, "{}", o.output);
        let e = invert("m3", M3, "b2_1", "1 * eta", text()).unwrap_err();
        assert!(e.to_string().starts_with("--f:1:5:"), "{e}");
    }

    #[test]
    fn reconstruct_m2() {
        let o = reconstruct("m2", M2, text()).unwrap();
        assert!(o.success, "{}", o.output);
        assert_eq!(reconstruct("m3", M3, text()).unwrap_err().exit_code(), 2);
    }
}
