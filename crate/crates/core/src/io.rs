//! File formats: instance, distribution, policy and basis files, plus JSON
//! output with floats printed to 17 significant digits.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::{json, Value};

use crate::discounted::initial_weighted_value;
use crate::dominance::{augmented_grid, benchmark_curve, shortfall_minus, GeneratorFamily};
use crate::error::{Error, Result};
use crate::mdp::{Distribution, MdpInstance, Mode, Policy, VectorDistribution};
use crate::occupation::{Dual, DominanceSpec, RowKey, SolveReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Point {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl Point {
    fn into_vec(self) -> Vec<f64> {
        match self {
            Point::Scalar(v) => vec![v],
            Point::Vector(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionFile {
    pub support: Vec<Point>,
    pub probs: Vec<f64>,
}

impl DistributionFile {
    pub fn scalar(d: &Distribution) -> Self {
        DistributionFile { support: d.support().iter().map(|&v| Point::Scalar(v)).collect(), probs: d.probs().to_vec() }
    }

    pub fn to_scalar(&self) -> Result<Distribution> {
        let support = self
            .support
            .iter()
            .map(|p| match p {
                Point::Scalar(v) => Ok(*v),
                Point::Vector(v) if v.len() == 1 => Ok(v[0]),
                Point::Vector(v) => Err(Error::Dimension(format!("expected scalar support point, found {} components", v.len()))),
            })
            .collect::<Result<Vec<_>>>()?;
        Distribution::new(support, self.probs.clone())
    }

    pub fn to_vector(&self) -> Result<VectorDistribution> {
        VectorDistribution::new(self.support.iter().cloned().map(Point::into_vec).collect(), self.probs.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyFile {
    pub weights: Vec<Vec<f64>>,
    pub etas: Vec<f64>,
}

/// Instance file as read from and written to disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub states: usize,
    pub actions: Vec<Vec<String>>,
    #[serde(rename = "P")]
    pub p: Vec<Vec<Vec<f64>>>,
    pub r: Vec<Vec<f64>>,
    pub z: Vec<Vec<Point>>,
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discount: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub benchmark: Option<DistributionFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilyFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extra_grid: Option<Vec<f64>>,
}

/// A parsed instance file.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub instance: MdpInstance,
    pub spec: Option<DominanceSpec>,
    pub extra_grid: Vec<f64>,
}

impl Problem {
    pub fn scalar_benchmark(&self) -> Result<&Distribution> {
        match &self.spec {
            Some(DominanceSpec::Scalar(b)) => Ok(b),
            Some(DominanceSpec::Family(_)) => Err(Error::InvalidArgument("this command needs a scalar benchmark".into())),
            None => Err(Error::InvalidArgument("instance has no benchmark".into())),
        }
    }
}

impl InstanceFile {
    pub fn from_instance(inst: &MdpInstance, bench: Option<&Distribution>) -> Self {
        InstanceFile {
            states: inst.num_states,
            actions: inst.actions.clone(),
            p: inst.transition.clone(),
            r: inst.reward_r.clone(),
            z: inst
                .reward_z
                .iter()
                .map(|row| row.iter().map(|z| if z.len() == 1 { Point::Scalar(z[0]) } else { Point::Vector(z.clone()) }).collect())
                .collect(),
            mode: inst.mode,
            discount: inst.discount,
            initial: inst.initial.clone(),
            benchmark: bench.map(DistributionFile::scalar),
            family: None,
            extra_grid: None,
        }
    }

    pub fn into_problem(self) -> Result<Problem> {
        let instance = MdpInstance {
            num_states: self.states,
            actions: self.actions,
            transition: self.p,
            reward_r: self.r,
            reward_z: self.z.into_iter().map(|row| row.into_iter().map(Point::into_vec).collect()).collect(),
            mode: self.mode,
            discount: self.discount,
            initial: self.initial,
        };
        instance.ensure_valid()?;
        let spec = match (self.benchmark, self.family) {
            (None, None) => None,
            (None, Some(_)) => return Err(Error::InvalidArgument("family given without a benchmark".into())),
            (Some(b), None) => Some(DominanceSpec::Scalar(b.to_scalar()?)),
            (Some(b), Some(f)) => Some(DominanceSpec::Family(GeneratorFamily::new(f.weights, f.etas, b.to_vector()?)?)),
        };
        Ok(Problem { instance, spec, extra_grid: self.extra_grid.unwrap_or_default() })
    }
}

pub fn parse_problem(text: &str) -> Result<Problem> {
    serde_json::from_str::<InstanceFile>(text)?.into_problem()
}

pub fn load_problem(path: &Path) -> Result<Problem> {
    parse_problem(&std::fs::read_to_string(path)?)
}

pub fn load_distribution(path: &Path) -> Result<Distribution> {
    serde_json::from_str::<DistributionFile>(&std::fs::read_to_string(path)?)?.to_scalar()
}

/// Either a bare list of per-state probability rows or an object with a
/// `"policy"` entry of `[state, [probs]]` pairs (as in solve reports).
pub fn parse_policy(text: &str, inst: &MdpInstance) -> Result<Policy> {
    let v: Value = serde_json::from_str(text)?;
    let probs: Vec<Vec<f64>> = match &v {
        Value::Object(m) => {
            let entries: Vec<(usize, Vec<f64>)> = serde_json::from_value(
                m.get("policy").cloned().ok_or_else(|| Error::InvalidPolicy("object without \"policy\"".into()))?,
            )?;
            let mut rows = vec![Vec::new(); inst.num_states];
            for (s, p) in entries {
                if s >= inst.num_states {
                    return Err(Error::InvalidPolicy(format!("state {s} out of range")));
                }
                rows[s] = p;
            }
            rows
        }
        _ => serde_json::from_value(v)?,
    };
    let policy = Policy { probs };
    policy.validate(inst)?;
    Ok(policy)
}

/// `%.17g`: 17 significant digits, trailing zeros removed, exponent form
/// outside `[1e-5, 1e17)`. Negative zero prints as `0`.
pub fn format_g17(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.16e}");
    let (mantissa, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if !(-5..17).contains(&exp) {
        let sign = if exp < 0 { "-" } else { "+" };
        format!("{}e{sign}{:02}", trim(mantissa), exp.abs())
    } else {
        let decimals = (16 - exp).max(0) as usize;
        trim(&format!("{v:.decimals$}"))
    }
}

/// Pretty JSON with [`format_g17`] floats.
pub struct G17Formatter(PrettyFormatter<'static>);

impl Default for G17Formatter {
    fn default() -> Self {
        G17Formatter(PrettyFormatter::new())
    }
}

impl Formatter for G17Formatter {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> std::io::Result<()> {
        w.write_all(format_g17(value).as_bytes())
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, G17Formatter::default());
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

fn num(v: f64) -> Value {
    serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
}

fn key_json(k: &RowKey, v: f64) -> Value {
    match &k.weights {
        None => json!([num(k.eta), num(v)]),
        Some(w) => json!([num(k.eta), num(v), w]),
    }
}

/// Report object; `extra_grid` adds diagnostic margins at grid points
/// beyond the benchmark support (scalar benchmarks only).
pub fn report_json(report: &SolveReport, inst: &MdpInstance, bench: Option<&Distribution>, extra_grid: &[f64]) -> Value {
    let mut out = serde_json::Map::new();
    out.insert("status".into(), json!(report.status.as_str()));
    out.insert("mode".into(), json!(report.mode));
    out.insert("order".into(), json!(report.order));
    out.insert("objective".into(), num(report.objective));
    out.insert("dual_objective".into(), num(report.dual_objective));
    out.insert("gap".into(), num(report.gap));
    out.insert("lp_iterations".into(), json!(report.lp_iterations));
    if let Some(f) = report.benchmark_scale {
        out.insert("benchmark_scale".into(), num(f));
    }
    if let Some(occ) = &report.occupation {
        let x: Vec<Value> = occ.pairs.iter().map(|(k, (s, a))| json!([s, a, num(occ.values[k])])).collect();
        out.insert("x".into(), Value::Array(x));
    }
    if let Some(p) = &report.policy {
        let rows: Vec<Value> = p.probs.iter().enumerate().map(|(s, r)| json!([s, r])).collect();
        out.insert("policy".into(), Value::Array(rows));
    }
    if let Some(dual) = &report.dual {
        match dual {
            Dual::Average(d) => {
                out.insert("g".into(), num(d.g));
                out.insert("h".into(), json!(d.h));
            }
            Dual::Discounted(d) => {
                out.insert("initial_weighted_value".into(), num(initial_weighted_value(report, inst).unwrap_or(f64::NAN)));
                out.insert("v".into(), json!(d.v));
            }
        }
        out.insert("lambda".into(), Value::Array(dual.lambda().iter().map(|(k, v)| key_json(k, *v)).collect()));
        if let Some(u) = dual.utility() {
            out.insert("utility".into(), json!({"breakpoints": u.breakpoints(), "weights": u.weights()}));
        }
    }
    if let Some(s) = &report.slackness {
        out.insert(
            "slackness".into(),
            json!({
                "max_dominance": num(s.max_dominance),
                "max_pair": num(s.max_pair),
                "scale": num(s.scale),
                "dominance": s.dominance,
                "pairs": s.pairs,
            }),
        );
    }
    if !report.optimality_residuals.is_empty() {
        let res: Vec<Value> = report
            .optimality_residuals
            .iter()
            .map(|r| json!({"state": r.state, "marginal": num(r.marginal), "residual": num(r.residual), "required": r.required}))
            .collect();
        out.insert("optimality_residuals".into(), Value::Array(res));
    }
    if report.is_optimal() {
        out.insert(
            "dominance_margins".into(),
            Value::Array(report.dominance_margins.iter().map(|(k, v)| key_json(k, *v)).collect()),
        );
    }
    if let Some(c) = &report.certificate {
        out.insert(
            "certificate".into(),
            json!({
                "rows": c.rows.iter().map(|(l, v)| json!([l, num(*v)])).collect::<Vec<_>>(),
                "binding_eta": c.binding.iter().map(|k| num(k.eta)).collect::<Vec<_>>(),
            }),
        );
    }
    if let Some(ray) = &report.unbounded_ray {
        out.insert("unbounded_ray".into(), json!(ray));
    }
    if let Some(classes) = &report.multichain {
        out.insert("multichain".into(), json!(classes));
    }
    if let (Some(b), Some(occ), false) = (bench, &report.occupation, extra_grid.is_empty()) {
        let grid = augmented_grid(b, extra_grid);
        if let Ok(curve) = benchmark_curve(b, &grid) {
            let margins: Vec<Value> = curve
                .iter()
                .map(|(eta, y)| {
                    let v: f64 = occ.pairs.iter().map(|(k, (s, a))| occ.values[k] * shortfall_minus(inst.z(s, a), eta)).sum();
                    let m = match report.order {
                        crate::occupation::Order::Icv => v - y,
                        crate::occupation::Order::Icx => f64::NAN,
                    };
                    json!([num(eta), num(m)])
                })
                .collect();
            out.insert("grid_margins".into(), Value::Array(margins));
        }
    }
    Value::Object(out)
}

pub fn write_output(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g17() {
        assert_eq!(format_g17(2.0), "2");
        assert_eq!(format_g17(0.1), "0.10000000000000001");
        assert_eq!(format_g17(-4.5), "-4.5");
        assert_eq!(format_g17(1e-7), "9.9999999999999995e-08");
        assert_eq!(format_g17(1e20), "1e+20");
        assert_eq!(format_g17(123456.789), "123456.789");
        for v in [0.1, 1.0 / 3.0, 2.0_f64.sqrt(), -7.25e-12, 6.02e23, f64::MIN_POSITIVE] {
            assert_eq!(format_g17(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn instance_round_trip() {
        let text = r#"{"states":1,"actions":[["a","b"]],"P":[[[1.0],[1.0]]],"r":[[2,5]],"z":[[10,[0]]],
            "mode":"average","benchmark":{"support":[4,4],"probs":[0.5,0.5]}}"#;
        let p = parse_problem(text).unwrap();
        assert_eq!(p.instance, crate::fixtures::ti1());
        assert_eq!(p.scalar_benchmark().unwrap(), &Distribution::point_mass(4.0));
        let back = InstanceFile::from_instance(&p.instance, Some(p.scalar_benchmark().unwrap()));
        let again = serde_json::from_str::<InstanceFile>(&to_json_string(&back).unwrap()).unwrap().into_problem().unwrap();
        assert_eq!(again, p);
    }

    #[test]
    fn family_and_errors() {
        let text = r#"{"states":1,"actions":[["a"]],"P":[[[1.0]]],"r":[[1]],"z":[[[1,2]]],"mode":"average",
            "benchmark":{"support":[[0,0]],"probs":[1]},"family":{"weights":[[1,0],[0.5,0.5]],"etas":[0,1]}}"#;
        let p = parse_problem(text).unwrap();
        match p.spec {
            Some(DominanceSpec::Family(f)) => assert_eq!(f.params.len(), 4),
            other => panic!("{other:?}"),
        }
        assert!(parse_problem(r#"{"states":1}"#).is_err());
        let bad = r#"{"states":1,"actions":[["a"]],"P":[[[0.5]]],"r":[[1]],"z":[[0]],"mode":"average"}"#;
        assert!(matches!(parse_problem(bad), Err(Error::InvalidInstance(_))));
    }

    #[test]
    fn policy_formats() {
        let inst = crate::fixtures::ti1();
        assert_eq!(parse_policy("[[0.25,0.75]]", &inst).unwrap().probs, vec![vec![0.25, 0.75]]);
        assert_eq!(parse_policy(r#"{"policy":[[0,[1,0]]]}"#, &inst).unwrap().probs, vec![vec![1.0, 0.0]]);
        assert!(parse_policy("[[0.5,0.6]]", &inst).is_err());
    }
}
