//! The BoxQP model and its file format.
//!
//! An instance is `maximize f(x) = ½ Σ Q_ij x_i x_j + Σ V_i x_i` subject to
//! `ℓ_i ≤ x_i ≤ u_i`, with `Q` symmetric and stored dense, row-major.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

const MAGIC: &str = "BOXQP";
const FORMAT_VERSION: &str = "1";
const COEFF_MAGNITUDE: i64 = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxQpInstance {
    n: usize,
    q: Vec<f64>,
    v: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    density: Option<f64>,
    seed: Option<u64>,
    known_optimum: Option<f64>,
}

/// A point in problem space together with its objective value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionVector {
    pub x: Vec<f64>,
    pub objective: f64,
}

/// Parameters of the random instance family `N-D-S`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub n: usize,
    pub density: f64,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn new(n: usize, density: f64, seed: u64) -> Self {
        Self { n, density, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("problem size must be positive"));
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return Err(Error::invalid(format!(
                "density {} outside (0, 1]",
                self.density
            )));
        }
        Ok(())
    }

    /// `N-D-S` with the density written as a whole percentage.
    pub fn label(&self) -> String {
        format_label(self.n, self.density, self.seed)
    }
}

fn format_label(n: usize, density: f64, seed: u64) -> String {
    format!("{}-{}-{}", n, (density * 100.0).round() as i64, seed)
}

impl BoxQpInstance {
    /// Builds a validated instance from a row-major `q`.
    pub fn new(q: Vec<f64>, v: Vec<f64>, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let n = v.len();
        let inst = Self {
            n,
            q,
            v,
            lower,
            upper,
            density: None,
            seed: None,
            known_optimum: None,
        };
        inst.validate()?;
        Ok(inst)
    }

    /// Instance on the unit box `[0, 1]^N`.
    pub fn unit_box(q: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        let n = v.len();
        Self::new(q, v, vec![0.0; n], vec![1.0; n])
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        if n == 0 {
            return Err(Error::Validation("problem size must be positive".into()));
        }
        if self.q.len() != n * n {
            return Err(Error::Validation(format!(
                "Q has {} entries, expected {}",
                self.q.len(),
                n * n
            )));
        }
        if self.lower.len() != n || self.upper.len() != n {
            return Err(Error::Validation("bound vectors must have length N".into()));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if self.q[i * n + j] != self.q[j * n + i] {
                    return Err(Error::Validation(format!(
                        "Q is not symmetric at ({i}, {j}): {} != {}",
                        self.q[i * n + j],
                        self.q[j * n + i]
                    )));
                }
            }
        }
        let finite = |s: &[f64]| s.iter().all(|x| x.is_finite());
        if !finite(&self.q) || !finite(&self.v) || !finite(&self.lower) || !finite(&self.upper) {
            return Err(Error::Validation("coefficients must be finite".into()));
        }
        for i in 0..n {
            if !(self.lower[i] < self.upper[i]) {
                return Err(Error::Validation(format!(
                    "lower bound {} is not below upper bound {} for variable {i}",
                    self.lower[i], self.upper[i]
                )));
            }
        }
        if let Some(d) = self.density {
            if !(d > 0.0 && d <= 1.0) {
                return Err(Error::Validation(format!("density {d} outside (0, 1]")));
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn q_row(&self, i: usize) -> &[f64] {
        &self.q[i * self.n..(i + 1) * self.n]
    }

    pub fn q_at(&self, i: usize, j: usize) -> f64 {
        self.q[i * self.n + j]
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Largest coefficient magnitude in `Q` and `V`, or 1 for an all-zero objective.
    pub fn coefficient_scale(&self) -> f64 {
        let m = self
            .q
            .iter()
            .chain(&self.v)
            .fold(0.0f64, |acc, v| acc.max(v.abs()));
        if m > 0.0 {
            m
        } else {
            1.0
        }
    }

    pub fn density(&self) -> Option<f64> {
        self.density
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// `N-D-S` when both density and seed are known.
    pub fn label(&self) -> Option<String> {
        match (self.density, self.seed) {
            (Some(d), Some(s)) => Some(format_label(self.n, d, s)),
            _ => None,
        }
    }

    pub fn known_optimum(&self) -> Option<f64> {
        self.known_optimum
    }

    pub fn set_known_optimum(&mut self, value: Option<f64>) {
        self.known_optimum = value;
    }

    pub fn with_provenance(mut self, density: Option<f64>, seed: Option<u64>) -> Self {
        self.density = density;
        self.seed = seed;
        self
    }

    fn check_len(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::invalid(format!(
                "vector has length {}, instance has N = {}",
                x.len(),
                self.n
            )));
        }
        Ok(())
    }

    pub fn evaluate_objective(&self, x: &[f64]) -> Result<f64> {
        self.check_len(x)?;
        Ok(self.objective_unchecked(x))
    }

    pub(crate) fn objective_unchecked(&self, x: &[f64]) -> f64 {
        let mut quad = 0.0;
        let mut lin = 0.0;
        for i in 0..self.n {
            quad += x[i] * dot(self.q_row(i), x);
            lin += self.v[i] * x[i];
        }
        0.5 * quad + lin
    }

    /// `Qx + V`.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x)?;
        let mut out = vec![0.0; self.n];
        self.gradient_into(x, &mut out);
        Ok(out)
    }

    pub(crate) fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(self.q_row(i), x) + self.v[i];
        }
    }

    pub fn project_to_box(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x)?;
        let mut out = x.to_vec();
        self.clamp_in_place(&mut out);
        Ok(out)
    }

    pub(crate) fn clamp_in_place(&self, x: &mut [f64]) {
        for ((xi, &lo), &hi) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *xi = xi.clamp(lo, hi);
        }
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| 0.5 * (l + u))
            .collect()
    }

    /// Evaluates `x` and packages it as a solution.
    pub fn solution(&self, x: Vec<f64>) -> Result<SolutionVector> {
        let objective = self.evaluate_objective(&x)?;
        Ok(SolutionVector { x, objective })
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.n
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(xi, (l, u))| *l <= *xi && *xi <= *u)
    }

    /// Renders the instance in the `BOXQP 1` text format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC} {FORMAT_VERSION}");
        let density = self
            .density
            .map_or_else(|| "-".to_string(), |d| d.to_string());
        let seed = self.seed.map_or_else(|| "-".to_string(), |s| s.to_string());
        let _ = writeln!(out, "N {} DENSITY {} SEED {}", self.n, density, seed);
        for i in 0..self.n {
            push_row(&mut out, self.q_row(i));
        }
        push_row(&mut out, &self.v);
        push_row(&mut out, &self.lower);
        push_row(&mut out, &self.upper);
        if let Some(opt) = self.known_optimum {
            let _ = writeln!(out, "OPT {opt}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        parse_instance(text)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn push_row(out: &mut String, row: &[f64]) {
    for (k, value) in row.iter().enumerate() {
        if k > 0 {
            out.push(' ');
        }
        // `Display` for f64 is the shortest string that round-trips.
        let _ = write!(out, "{value}");
    }
    out.push('\n');
}

pub fn evaluate_objective(inst: &BoxQpInstance, x: &[f64]) -> Result<f64> {
    inst.evaluate_objective(x)
}

pub fn gradient(inst: &BoxQpInstance, x: &[f64]) -> Result<Vec<f64>> {
    inst.gradient(x)
}

pub fn project_to_box(inst: &BoxQpInstance, x: &[f64]) -> Result<Vec<f64>> {
    inst.project_to_box(x)
}

/// Draws an `N-D-S` instance on the unit box.
///
/// The stream is consumed in a fixed order: every upper-triangle entry of
/// `Q` (row-major, diagonal included) and then every entry of `V`. Each
/// entry takes one uniform double for the Bernoulli(`density`) retention
/// test and, if retained, one rejection-sampled integer in `[-50, 50]`.
pub fn generate_instance(spec: &GeneratorSpec) -> Result<BoxQpInstance> {
    spec.validate()?;
    let n = spec.n;
    let mut rng = rng::seeded(spec.seed);
    let draw = |rng: &mut rng::TrialRng| -> f64 {
        if rng::unit_f64(rng) < spec.density {
            rng::uniform_int(rng, -COEFF_MAGNITUDE, COEFF_MAGNITUDE) as f64
        } else {
            0.0
        }
    };
    let mut q = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let value = draw(&mut rng);
            q[i * n + j] = value;
            q[j * n + i] = value;
        }
    }
    let v: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();
    Ok(BoxQpInstance::unit_box(q, v)?.with_provenance(Some(spec.density), Some(spec.seed)))
}

pub fn save_instance(inst: &BoxQpInstance, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    write_atomic(path, inst.to_text().as_bytes())
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<BoxQpInstance> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_instance(&text)
}

/// Writes `bytes` to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("{} has no file name", path.display())))?;
    let tmp_name = format!(".{}.tmp{}", file_name.to_string_lossy(), std::process::id());
    let tmp = match dir {
        Some(d) => d.join(tmp_name),
        None => Path::new(&tmp_name).to_path_buf(),
    };
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_real(tok: &str, line: usize) -> Result<f64> {
    tok.parse::<f64>()
        .map_err(|_| parse_err(line, format!("`{tok}` is not a real number")))
}

fn parse_row(content: &str, line: usize, n: usize, section: &str) -> Result<Vec<f64>> {
    let row = content
        .split_whitespace()
        .map(|t| parse_real(t, line))
        .collect::<Result<Vec<_>>>()?;
    if row.len() != n {
        return Err(parse_err(
            line,
            format!("{section} has {} values, expected {n}", row.len()),
        ));
    }
    Ok(row)
}

fn parse_instance(text: &str) -> Result<BoxQpInstance> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    let (ln, magic) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let mut toks = magic.split_whitespace();
    if toks.next() != Some(MAGIC) {
        return Err(parse_err(
            ln,
            format!("expected `{MAGIC} {FORMAT_VERSION}` header"),
        ));
    }
    match toks.next() {
        Some(FORMAT_VERSION) => {}
        Some(v) => return Err(parse_err(ln, format!("unsupported format version `{v}`"))),
        None => return Err(parse_err(ln, "missing format version")),
    }

    let (ln, meta) = lines
        .next()
        .ok_or_else(|| parse_err(ln + 1, "missing `N <n> DENSITY <d> SEED <s>` line"))?;
    let toks: Vec<&str> = meta.split_whitespace().collect();
    if toks.len() != 6 || toks[0] != "N" || toks[2] != "DENSITY" || toks[4] != "SEED" {
        return Err(parse_err(ln, "expected `N <n> DENSITY <d> SEED <s>`"));
    }
    let n: usize = toks[1]
        .parse()
        .map_err(|_| parse_err(ln, format!("`{}` is not a problem size", toks[1])))?;
    if n == 0 {
        return Err(parse_err(ln, "problem size must be positive"));
    }
    let density = match toks[3] {
        "-" => None,
        t => Some(parse_real(t, ln)?),
    };
    let seed = match toks[5] {
        "-" => None,
        t => Some(
            t.parse::<u64>()
                .map_err(|_| parse_err(ln, format!("`{t}` is not a seed")))?,
        ),
    };

    let mut last_line = ln;
    let mut next_section = |section: &str| -> Result<(usize, &str)> {
        match lines.next() {
            Some((k, l)) if !l.starts_with("OPT") => {
                last_line = k;
                Ok((k, l))
            }
            Some((k, _)) => Err(parse_err(
                k,
                format!("missing {section} (found OPT line; expected N rows of Q, then V, lower and upper)"),
            )),
            None => Err(parse_err(
                last_line + 1,
                format!("missing {section} (expected N rows of Q, then V, lower and upper)"),
            )),
        }
    };

    let mut q = Vec::with_capacity(n * n);
    for i in 0..n {
        let section = format!("Q row {}", i + 1);
        let (k, l) = next_section(&section)?;
        q.extend(parse_row(l, k, n, &section)?);
    }
    let (k, l) = next_section("V section")?;
    let v = parse_row(l, k, n, "V")?;
    let (k, l) = next_section("lower-bound section")?;
    let lower = parse_row(l, k, n, "lower bounds")?;
    let (k, l) = next_section("upper-bound section")?;
    let upper = parse_row(l, k, n, "upper bounds")?;

    let mut known_optimum = None;
    if let Some((k, l)) = lines.next() {
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() != 2 || toks[0] != "OPT" {
            return Err(parse_err(
                k,
                "unexpected content; only an `OPT <value>` line may follow the bounds",
            ));
        }
        known_optimum = Some(parse_real(toks[1], k)?);
    }
    if let Some((k, _)) = lines.next() {
        return Err(parse_err(k, "trailing content after OPT line"));
    }

    let mut inst = BoxQpInstance::new(q, v, lower, upper)?.with_provenance(density, seed);
    inst.validate()?;
    inst.known_optimum = known_optimum;
    Ok(inst)
}
