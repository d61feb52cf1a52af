//! Result-set values and equivalence.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

pub const DEFAULT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Null,
    Integer(i64),
    Real(f64),
    Text(String),
    Blob(Vec<u8>),
}

pub type Row = Vec<Cell>;

/// A fully materialized query result.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ResultSet {
    pub column_count: usize,
    pub rows: Vec<Row>,
}

impl ResultSet {
    pub fn new(column_count: usize, rows: Vec<Row>) -> Self {
        ResultSet { column_count, rows }
    }
}

impl Cell {
    fn as_number(&self) -> Option<f64> {
        match self {
            Cell::Integer(i) => Some(*i as f64),
            Cell::Real(r) => Some(*r),
            _ => None,
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Cell::Null => 0,
            Cell::Integer(_) | Cell::Real(_) => 1,
            Cell::Text(_) => 2,
            Cell::Blob(_) => 3,
        }
    }
}

/// Numbers within relative `tolerance`, text and blobs byte-equal, null
/// equal only to null.
pub fn cells_equal(a: &Cell, b: &Cell, tolerance: f64) -> bool {
    match (a, b) {
        (Cell::Null, Cell::Null) => true,
        (Cell::Integer(x), Cell::Integer(y)) => x == y,
        (Cell::Text(x), Cell::Text(y)) => x == y,
        (Cell::Blob(x), Cell::Blob(y)) => x == y,
        _ => match (a.as_number(), b.as_number()) {
            (Some(x), Some(y)) => x == y || (x - y).abs() <= tolerance * x.abs().max(y.abs()),
            _ => false,
        },
    }
}

fn rows_equal(a: &Row, b: &Row, tolerance: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| cells_equal(x, y, tolerance))
}

fn cell_order(a: &Cell, b: &Cell) -> Ordering {
    match (a, b) {
        (Cell::Text(x), Cell::Text(y)) => x.cmp(y),
        (Cell::Blob(x), Cell::Blob(y)) => x.cmp(y),
        _ => match (a.as_number(), b.as_number()) {
            (Some(x), Some(y)) => x.total_cmp(&y),
            _ => a.rank().cmp(&b.rank()),
        },
    }
}

fn row_order(a: &Row, b: &Row) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| cell_order(x, y))
        .find(|o| o.is_ne())
        .unwrap_or_else(|| a.len().cmp(&b.len()))
}

/// Column names play no part. Unordered comparison is multiset equality.
pub fn rows_equivalent(a: &ResultSet, b: &ResultSet, ordered: bool) -> bool {
    rows_equivalent_with(a, b, ordered, DEFAULT_TOLERANCE)
}

pub fn rows_equivalent_with(a: &ResultSet, b: &ResultSet, ordered: bool, tolerance: f64) -> bool {
    if a.column_count != b.column_count || a.rows.len() != b.rows.len() {
        return false;
    }
    let (a, b) = (&a.rows, &b.rows);
    if ordered {
        return a.iter().zip(b).all(|(x, y)| rows_equal(x, y, tolerance));
    }
    let mut sa: Vec<&Row> = a.iter().collect();
    let mut sb: Vec<&Row> = b.iter().collect();
    sa.sort_by(|x, y| row_order(x, y));
    sb.sort_by(|x, y| row_order(x, y));
    if sa.iter().zip(&sb).all(|(x, y)| rows_equal(x, y, tolerance)) {
        return true;
    }
    // Sorting can separate values that are equal only within tolerance.
    let mut unused: Vec<&Row> = sb;
    for row in sa {
        match unused.iter().position(|c| rows_equal(row, c, tolerance)) {
            Some(i) => {
                unused.swap_remove(i);
            }
            None => return false,
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ints(v: &[i64]) -> ResultSet {
        ResultSet::new(1, v.iter().map(|&i| vec![Cell::Integer(i)]).collect())
    }

    fn one(cell: Cell) -> ResultSet {
        ResultSet::new(1, vec![vec![cell]])
    }

    #[test]
    fn order_sensitivity() {
        assert!(rows_equivalent(&ints(&[1, 2]), &ints(&[2, 1]), false));
        assert!(!rows_equivalent(&ints(&[1, 2]), &ints(&[2, 1]), true));
    }

    #[test]
    fn third_within_tolerance() {
        let a = one(Cell::Real(0.3333333));
        let b = one(Cell::Real(1.0 / 3.0));
        assert!(rows_equivalent(&a, &b, true));
        let c = one(Cell::Real(0.33333));
        assert!(!rows_equivalent(&c, &b, true));
    }

    #[test]
    fn null_only_matches_null() {
        assert!(cells_equal(&Cell::Null, &Cell::Null, 0.0));
        assert!(!cells_equal(&Cell::Null, &Cell::Integer(0), 0.0));
        assert!(!cells_equal(&Cell::Text("1".into()), &Cell::Integer(1), 0.0));
    }

    #[test]
    fn integer_and_real_compare_numerically() {
        assert!(cells_equal(&Cell::Integer(2), &Cell::Real(2.0), 0.0));
    }

    #[test]
    fn multiset_counts_duplicates() {
        assert!(!rows_equivalent(&ints(&[1, 1, 2]), &ints(&[1, 2, 2]), false));
    }

    #[test]
    fn column_count_matters() {
        let a = ResultSet::new(2, vec![vec![Cell::Integer(1), Cell::Integer(2)]]);
        assert!(!rows_equivalent(&a, &ints(&[1]), false));
        assert!(!rows_equivalent(&ResultSet::new(2, vec![]), &ints(&[]), false));
    }
}
