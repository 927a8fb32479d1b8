//! Small reference models with closed-form statistics.
//!
//! | name | states | ℓ | description |
//! |------|--------|---|-------------|
//! | `f1` | 1 | 1 | i.i.d. letters, `P(a) = 2/3`; counts are Binomial(n, 2/3) |
//! | `f2` | 1 | 2 | i.i.d. letters with weights 1, 1, 2; counts are multinomial |
//! | `f3` | 2 | 1 | `y(t) = eᵗ + e^{t/2}` |
//! | `f4` | 2 | 1 | words without factor `aa`, `y(t) = (1 + √(1+4eᵗ))/2` |

use nalgebra::DMatrix;

use crate::model::LinearRepresentation;

fn square(m: usize, entries: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(m, m, entries)
}

fn names(labels: &[&str]) -> Vec<String> {
    labels.iter().map(|s| s.to_string()).collect()
}

pub fn f1() -> LinearRepresentation {
    LinearRepresentation::new(
        names(&["a"]),
        "b".into(),
        vec![1.0],
        vec![1.0],
        vec![square(1, &[2.0])],
        square(1, &[1.0]),
    )
    .expect("fixture is well formed")
}

pub fn f2() -> LinearRepresentation {
    LinearRepresentation::new(
        names(&["a", "c"]),
        "b".into(),
        vec![1.0],
        vec![1.0],
        vec![square(1, &[1.0]), square(1, &[1.0])],
        square(1, &[2.0]),
    )
    .expect("fixture is well formed")
}

pub fn f3() -> LinearRepresentation {
    LinearRepresentation::new(
        names(&["a"]),
        "b".into(),
        vec![1.0, 0.0],
        vec![1.0, 1.0],
        vec![square(2, &[1.0, 1.0, 0.0, 1.0])],
        square(2, &[0.0, 0.0, 1.0, 0.0]),
    )
    .expect("fixture is well formed")
}

pub fn f4() -> LinearRepresentation {
    LinearRepresentation::new(
        names(&["a"]),
        "b".into(),
        vec![1.0, 0.0],
        vec![1.0, 1.0],
        vec![square(2, &[0.0, 1.0, 0.0, 0.0])],
        square(2, &[1.0, 0.0, 1.0, 0.0]),
    )
    .expect("fixture is well formed")
}

/// All four fixtures with their names.
pub fn all() -> Vec<(&'static str, LinearRepresentation)> {
    vec![("f1", f1()), ("f2", f2()), ("f3", f3()), ("f4", f4())]
}
