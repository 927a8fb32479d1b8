//! Linear representations `(ξ, μ, η)` of rational stochastic models.
//!
//! A model over the alphabet `{a_1, …, a_ℓ, b}` is given by an initial
//! weight vector `ξ`, a final weight vector `η`, one nonnegative `m × m`
//! matrix per counted symbol `a_i` and one matrix `B` for the uncounted
//! symbol `b`. A word `w` has weight `ξ′ μ(w) η`, where `μ(w)` is the ordered
//! product of its per-symbol matrices, and words of length `n` are drawn
//! with probability proportional to that weight.
//!
//! Internally symbols are indexed positionally: `0..ℓ` are the counted
//! symbols in file order and `ℓ` is the uncounted one.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::Deref;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{self, PerronTriple};

/// Weighted automaton defining a rational stochastic model.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRepresentation {
    xi: DVector<f64>,
    eta: DVector<f64>,
    counted: Vec<DMatrix<f64>>,
    rest: DMatrix<f64>,
    counted_names: Vec<String>,
    rest_name: String,
}

impl LinearRepresentation {
    /// Builds a representation after structural checks: matching
    /// dimensions, distinct symbol names, finite and nonnegative weights.
    ///
    /// Zero vectors and zero matrices are accepted here; [`validate`]
    /// reports them.
    pub fn new(
        counted_names: Vec<String>,
        rest_name: String,
        xi: Vec<f64>,
        eta: Vec<f64>,
        counted: Vec<DMatrix<f64>>,
        rest: DMatrix<f64>,
    ) -> Result<Self> {
        if counted_names.is_empty() {
            return Err(Error::MalformedInput(
                "at least one counted symbol is required".into(),
            ));
        }
        if counted_names.len() != counted.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} counted symbols but {} counted matrices",
                counted_names.len(),
                counted.len()
            )));
        }
        let mut seen = BTreeSet::new();
        for name in counted_names.iter().chain(std::iter::once(&rest_name)) {
            if name.is_empty() {
                return Err(Error::MalformedInput("empty symbol name".into()));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::MalformedInput(format!(
                    "duplicate symbol name '{name}'"
                )));
            }
        }

        let m = xi.len();
        if m == 0 {
            return Err(Error::DimensionMismatch("dimension must be positive".into()));
        }
        if eta.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "eta has length {} but xi has length {m}",
                eta.len()
            )));
        }
        check_weights("xi", xi.iter().copied())?;
        check_weights("eta", eta.iter().copied())?;
        for (name, mat) in counted_names
            .iter()
            .zip(counted.iter())
            .chain(std::iter::once((&rest_name, &rest)))
        {
            if mat.nrows() != m || mat.ncols() != m {
                return Err(Error::DimensionMismatch(format!(
                    "matrix of '{name}' is {}x{}, expected {m}x{m}",
                    mat.nrows(),
                    mat.ncols()
                )));
            }
            check_weights(&format!("matrix '{name}'"), mat.iter().copied())?;
        }

        Ok(Self {
            xi: DVector::from_vec(xi),
            eta: DVector::from_vec(eta),
            counted,
            rest,
            counted_names,
            rest_name,
        })
    }

    /// Number of states `m`.
    pub fn dim(&self) -> usize {
        self.xi.len()
    }

    /// Number of counted symbols `ℓ`.
    pub fn ell(&self) -> usize {
        self.counted.len()
    }

    pub fn xi(&self) -> &DVector<f64> {
        &self.xi
    }

    pub fn eta(&self) -> &DVector<f64> {
        &self.eta
    }

    pub fn counted_matrices(&self) -> &[DMatrix<f64>] {
        &self.counted
    }

    pub fn rest_matrix(&self) -> &DMatrix<f64> {
        &self.rest
    }

    pub fn counted_names(&self) -> &[String] {
        &self.counted_names
    }

    pub fn rest_name(&self) -> &str {
        &self.rest_name
    }

    /// Matrix of the symbol at position `index` (`ℓ` is the uncounted one).
    pub fn symbol_matrix(&self, index: usize) -> &DMatrix<f64> {
        if index == self.ell() {
            &self.rest
        } else {
            &self.counted[index]
        }
    }

    /// Label of the symbol at position `index`.
    pub fn symbol_name(&self, index: usize) -> &str {
        if index == self.ell() {
            &self.rest_name
        } else {
            &self.counted_names[index]
        }
    }

    /// `M = A_1 + … + A_ℓ + B`.
    pub fn total_matrix(&self) -> DMatrix<f64> {
        let mut total = DMatrix::zeros(self.dim(), self.dim());
        for a in &self.counted {
            total += a;
        }
        total += &self.rest;
        total
    }

    /// Weight `ξ′ μ(w) η` of a word given as symbol indices.
    pub fn word_weight(&self, word: &[usize]) -> f64 {
        let mut row = self.xi.transpose();
        for &symbol in word {
            row = row * self.symbol_matrix(symbol);
        }
        (row * &self.eta)[(0, 0)]
    }

    /// Concatenates the labels of a word.
    pub fn render_word(&self, word: &[usize]) -> String {
        word.iter().map(|&s| self.symbol_name(s)).collect()
    }

    /// Parses the JSON model-file format.
    pub fn from_json(text: &str) -> Result<Self> {
        parse_model(text)
    }

    /// Serializes to the JSON model-file format.
    pub fn to_json(&self) -> String {
        let to_rows = |mat: &DMatrix<f64>| -> Vec<Vec<f64>> {
            mat.row_iter().map(|r| r.iter().copied().collect()).collect()
        };
        let mut matrices = BTreeMap::new();
        for (name, mat) in self.counted_names.iter().zip(&self.counted) {
            matrices.insert(name.clone(), to_rows(mat));
        }
        matrices.insert(self.rest_name.clone(), to_rows(&self.rest));
        let file = ModelFile {
            dim: self.dim(),
            counted_symbols: self.counted_names.clone(),
            uncounted_symbol: self.rest_name.clone(),
            xi: self.xi.iter().copied().collect(),
            eta: self.eta.iter().copied().collect(),
            matrices,
        };
        serde_json::to_string_pretty(&file).expect("model file serialization is infallible")
    }
}

fn check_weights(location: &str, values: impl Iterator<Item = f64>) -> Result<()> {
    for value in values {
        if !value.is_finite() {
            return Err(Error::MalformedInput(format!(
                "non-finite weight in {location}"
            )));
        }
        if value < 0.0 {
            return Err(Error::NegativeWeight {
                location: location.to_string(),
                value,
            });
        }
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    dim: usize,
    counted_symbols: Vec<String>,
    uncounted_symbol: String,
    xi: Vec<f64>,
    eta: Vec<f64>,
    matrices: BTreeMap<String, Vec<Vec<f64>>>,
}

/// Parses a model file. Dimensions and signs are checked; primitivity is not.
pub fn parse_model(text: &str) -> Result<LinearRepresentation> {
    let mut file: ModelFile =
        serde_json::from_str(text).map_err(|e| Error::MalformedInput(e.to_string()))?;
    let m = file.dim;
    if m == 0 {
        return Err(Error::DimensionMismatch("dim must be positive".into()));
    }
    if file.xi.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "xi has length {}, dim is {m}",
            file.xi.len()
        )));
    }
    if file.eta.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "eta has length {}, dim is {m}",
            file.eta.len()
        )));
    }

    let mut take = |name: &str| -> Result<DMatrix<f64>> {
        let rows = file
            .matrices
            .remove(name)
            .ok_or_else(|| Error::MissingSymbol(name.to_string()))?;
        matrix_from_rows(name, m, &rows)
    };
    let counted = file
        .counted_symbols
        .iter()
        .map(|name| take(name))
        .collect::<Result<Vec<_>>>()?;
    let rest = take(&file.uncounted_symbol)?;
    if let Some(extra) = file.matrices.keys().next() {
        return Err(Error::MalformedInput(format!(
            "matrix given for unknown symbol '{extra}'"
        )));
    }

    LinearRepresentation::new(
        file.counted_symbols,
        file.uncounted_symbol,
        file.xi,
        file.eta,
        counted,
        rest,
    )
}

fn matrix_from_rows(name: &str, m: usize, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    if rows.len() != m || rows.iter().any(|r| r.len() != m) {
        return Err(Error::DimensionMismatch(format!(
            "matrix of '{name}' is not {m}x{m}"
        )));
    }
    Ok(DMatrix::from_fn(m, m, |i, j| rows[i][j]))
}

/// Outcome of [`validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub primitive: bool,
    /// The power `(m−1)² + 1` at which positivity of the support was tested.
    pub wielandt_exponent_used: usize,
    /// Perron-Frobenius eigenvalue `λ` of `M`; present when `primitive`.
    pub perron_value: Option<f64>,
    pub warnings: Vec<String>,
}

/// Wielandt bound `(m−1)² + 1` on the primitivity exponent.
pub fn wielandt_exponent(m: usize) -> usize {
    (m.saturating_sub(1)).pow(2) + 1
}

/// Primitivity test on the boolean support of a nonnegative square matrix.
///
/// A primitive matrix has `T^k > 0` for every `k ≥ (m−1)²+1`, and a
/// non-primitive one has no positive power, so it suffices to square the
/// support until the exponent passes the Wielandt bound.
pub fn is_primitive(matrix: &DMatrix<f64>) -> bool {
    let m = matrix.nrows();
    if m == 0 || matrix.ncols() != m {
        return false;
    }
    let target = wielandt_exponent(m);
    let mut support = BoolMatrix::support(matrix);
    let mut power = 1usize;
    while power < target {
        support = support.product(&support);
        power *= 2;
    }
    support.all()
}

#[derive(Clone)]
struct BoolMatrix {
    m: usize,
    cells: Vec<bool>,
}

impl BoolMatrix {
    fn support(matrix: &DMatrix<f64>) -> Self {
        let m = matrix.nrows();
        let cells = (0..m * m).map(|k| matrix[(k / m, k % m)] > 0.0).collect();
        Self { m, cells }
    }

    fn product(&self, other: &Self) -> Self {
        let m = self.m;
        let mut cells = vec![false; m * m];
        for i in 0..m {
            for k in 0..m {
                if !self.cells[i * m + k] {
                    continue;
                }
                for j in 0..m {
                    cells[i * m + j] |= other.cells[k * m + j];
                }
            }
        }
        Self { m, cells }
    }

    fn all(&self) -> bool {
        self.cells.iter().all(|&c| c)
    }
}

/// Checks the non-degeneracy hypotheses and primitivity of `M`.
pub fn validate(model: &LinearRepresentation) -> Result<ValidationReport> {
    if model.xi.iter().all(|&w| w == 0.0) {
        return Err(Error::ZeroVector("xi"));
    }
    if model.eta.iter().all(|&w| w == 0.0) {
        return Err(Error::ZeroVector("eta"));
    }
    for index in 0..=model.ell() {
        if model.symbol_matrix(index).iter().all(|&w| w == 0.0) {
            return Err(Error::ZeroMatrix(model.symbol_name(index).to_string()));
        }
    }

    let m = model.dim();
    let total = model.total_matrix();
    let exponent = wielandt_exponent(m);
    let mut warnings = Vec::new();
    if model.xi.iter().any(|&w| w == 0.0) {
        warnings.push("xi has zero entries".to_string());
    }
    if model.eta.iter().any(|&w| w == 0.0) {
        warnings.push("eta has zero entries".to_string());
    }
    for i in 0..m {
        if total.row(i).iter().all(|&w| w == 0.0) {
            warnings.push(format!("total weight matrix has a zero row at state {i}"));
        }
        if total.column(i).iter().all(|&w| w == 0.0) {
            warnings.push(format!("total weight matrix has a zero column at state {i}"));
        }
    }

    // Lengths n <= exponent at which no word has positive weight.
    let mut reach: Vec<bool> = model.xi.iter().map(|&w| w > 0.0).collect();
    let mut empty_lengths = Vec::new();
    for n in 0..=exponent {
        let hits = reach.iter().zip(model.eta.iter()).any(|(&r, &e)| r && e > 0.0);
        if !hits {
            empty_lengths.push(n);
        }
        reach = (0..m)
            .map(|q| (0..m).any(|p| reach[p] && total[(p, q)] > 0.0))
            .collect();
    }
    if !empty_lengths.is_empty() {
        warnings.push(format!(
            "xi' M^n eta = 0 for n in {empty_lengths:?}"
        ));
    }

    let primitive = is_primitive(&total);
    let perron_value = if primitive {
        Some(spectral::perron_triple(&total)?.value)
    } else {
        None
    };
    Ok(ValidationReport {
        primitive,
        wielandt_exponent_used: exponent,
        perron_value,
        warnings,
    })
}

/// A representation whose total matrix has been checked primitive, together
/// with the Perron triple `(λ, u, v)` of `M`.
///
/// Spectral, asymptotic and deviation analytics only accept this type.
#[derive(Debug, Clone)]
pub struct PrimitiveModel {
    representation: LinearRepresentation,
    perron: PerronTriple,
}

impl PrimitiveModel {
    pub fn new(representation: LinearRepresentation) -> Result<Self> {
        let report = validate(&representation)?;
        if !report.primitive {
            return Err(Error::NotPrimitive);
        }
        let zero = vec![0.0; representation.ell()];
        let perron = spectral::perron_triple(&spectral::m_of_t(&representation, &zero)?)?;
        Ok(Self {
            representation,
            perron,
        })
    }

    pub fn representation(&self) -> &LinearRepresentation {
        &self.representation
    }

    /// Perron triple of the untilted matrix `M`.
    pub fn perron(&self) -> &PerronTriple {
        &self.perron
    }

    /// Perron-Frobenius eigenvalue `λ` of `M`.
    pub fn lambda(&self) -> f64 {
        self.perron.value
    }
}

impl Deref for PrimitiveModel {
    type Target = LinearRepresentation;

    fn deref(&self) -> &LinearRepresentation {
        &self.representation
    }
}

/// One transition of a [`DfaTable`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transition {
    pub from: usize,
    pub label: String,
    pub to: usize,
}

/// Deterministic automaton over `{a_1, …, a_ℓ, b}`; converts to the model of
/// the uniform distribution on accepted words of each length.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DfaTable {
    pub states: usize,
    pub alphabet: Vec<String>,
    pub uncounted_symbol: String,
    pub initial: usize,
    pub accepting: Vec<usize>,
    pub transitions: Vec<Transition>,
}

impl DfaTable {
    pub fn from_json(text: &str) -> Result<Self> {
        let dfa: DfaTable =
            serde_json::from_str(text).map_err(|e| Error::MalformedInput(e.to_string()))?;
        dfa.check()?;
        Ok(dfa)
    }

    /// Checks determinism, state bounds and label membership.
    pub fn check(&self) -> Result<()> {
        if self.states == 0 {
            return Err(Error::InvalidDfa("at least one state is required".into()));
        }
        let labels: BTreeSet<&str> = self.alphabet.iter().map(String::as_str).collect();
        if labels.len() != self.alphabet.len() {
            return Err(Error::InvalidDfa("duplicate alphabet label".into()));
        }
        if !labels.contains(self.uncounted_symbol.as_str()) {
            return Err(Error::InvalidDfa(format!(
                "uncounted symbol '{}' is not in the alphabet",
                self.uncounted_symbol
            )));
        }
        if self.alphabet.len() < 2 {
            return Err(Error::InvalidDfa(
                "alphabet needs at least one counted label".into(),
            ));
        }
        if self.initial >= self.states {
            return Err(Error::InvalidDfa(format!(
                "initial state {} out of range",
                self.initial
            )));
        }
        if let Some(&q) = self.accepting.iter().find(|&&q| q >= self.states) {
            return Err(Error::InvalidDfa(format!("accepting state {q} out of range")));
        }
        let mut seen = BTreeSet::new();
        for t in &self.transitions {
            if t.from >= self.states || t.to >= self.states {
                return Err(Error::InvalidDfa(format!(
                    "transition {} -{}-> {} references a missing state",
                    t.from, t.label, t.to
                )));
            }
            if !labels.contains(t.label.as_str()) {
                return Err(Error::InvalidDfa(format!("unknown label '{}'", t.label)));
            }
            if !seen.insert((t.from, t.label.as_str())) {
                return Err(Error::InvalidDfa(format!(
                    "state {} has two transitions labelled '{}'",
                    t.from, t.label
                )));
            }
        }
        Ok(())
    }

    /// Counted labels in alphabet order.
    pub fn counted_labels(&self) -> Vec<String> {
        self.alphabet
            .iter()
            .filter(|l| **l != self.uncounted_symbol)
            .cloned()
            .collect()
    }
}

/// Characteristic-series representation of the language accepted by `dfa`.
pub fn dfa_to_model(dfa: &DfaTable) -> Result<LinearRepresentation> {
    dfa.check()?;
    let m = dfa.states;
    let counted_names = dfa.counted_labels();
    let mut counted = vec![DMatrix::zeros(m, m); counted_names.len()];
    let mut rest = DMatrix::zeros(m, m);
    for t in &dfa.transitions {
        if t.label == dfa.uncounted_symbol {
            rest[(t.from, t.to)] = 1.0;
        } else {
            let index = counted_names
                .iter()
                .position(|l| *l == t.label)
                .expect("label checked against alphabet");
            counted[index][(t.from, t.to)] = 1.0;
        }
    }
    let mut xi = vec![0.0; m];
    xi[dfa.initial] = 1.0;
    let mut eta = vec![0.0; m];
    for &q in &dfa.accepting {
        eta[q] = 1.0;
    }
    LinearRepresentation::new(
        counted_names,
        dfa.uncounted_symbol.clone(),
        xi,
        eta,
        counted,
        rest,
    )
}
