//! Small symbolic matrix algebra over [`Expr`].

use crate::error::{Error, Result};
use crate::expr::Expr;

pub type SymMatrix = Vec<Vec<Expr>>;

pub fn identity(n: usize) -> SymMatrix {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { Expr::one() } else { Expr::zero() }).collect())
        .collect()
}

pub fn transpose(a: &SymMatrix) -> SymMatrix {
    let cols = a.first().map_or(0, Vec::len);
    (0..cols).map(|j| a.iter().map(|row| row[j].clone()).collect()).collect()
}

pub fn mul(a: &SymMatrix, b: &SymMatrix) -> SymMatrix {
    let inner = b.len();
    let cols = b.first().map_or(0, Vec::len);
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| {
                    Expr::sum(
                        (0..inner)
                            .filter(|&k| !row[k].is_zero() && !b[k][j].is_zero())
                            .map(|k| row[k].clone() * b[k][j].clone()),
                    )
                })
                .collect()
        })
        .collect()
}

pub fn mul_vec(a: &SymMatrix, v: &[Expr]) -> Vec<Expr> {
    a.iter()
        .map(|row| {
            Expr::sum(
                row.iter()
                    .zip(v)
                    .filter(|(x, y)| !x.is_zero() && !y.is_zero())
                    .map(|(x, y)| x.clone() * y.clone()),
            )
        })
        .collect()
}

fn minor(a: &SymMatrix, skip_row: usize, skip_col: usize) -> SymMatrix {
    a.iter()
        .enumerate()
        .filter(|(i, _)| *i != skip_row)
        .map(|(_, row)| {
            row.iter()
                .enumerate()
                .filter(|(j, _)| *j != skip_col)
                .map(|(_, e)| e.clone())
                .collect()
        })
        .collect()
}

/// Laplace expansion; fine for the handful of rows used here.
pub fn det(a: &SymMatrix) -> Expr {
    match a.len() {
        0 => Expr::one(),
        1 => a[0][0].clone(),
        2 => a[0][0].clone() * a[1][1].clone() - a[0][1].clone() * a[1][0].clone(),
        n => Expr::sum((0..n).filter(|&j| !a[0][j].is_zero()).map(|j| {
            let term = a[0][j].clone() * det(&minor(a, 0, j));
            if j % 2 == 0 {
                term
            } else {
                -term
            }
        })),
    }
}

/// Inverse by the adjugate formula.
pub fn inverse(a: &SymMatrix) -> Result<SymMatrix> {
    let n = a.len();
    if a.iter().any(|row| row.len() != n) {
        return Err(Error::Dimension("inverse of a non-square matrix".into()));
    }
    if is_constant_identity(a) {
        return Ok(identity(n));
    }
    let d = det(a);
    if d.is_zero() {
        return Err(Error::Precondition("matrix is singular".into()));
    }
    if n == 1 {
        return Ok(vec![vec![Expr::one() / d]]);
    }
    Ok((0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let c = det(&minor(a, j, i)) / d.clone();
                    if (i + j) % 2 == 0 {
                        c
                    } else {
                        -c
                    }
                })
                .collect()
        })
        .collect())
}

fn is_constant_identity(a: &SymMatrix) -> bool {
    a.iter().enumerate().all(|(i, row)| {
        row.iter()
            .enumerate()
            .all(|(j, e)| e.as_const() == Some(if i == j { 1.0 } else { 0.0 }))
    })
}

/// If the columns of `k` are distinct unit vectors, the rows they select.
pub fn coordinate_columns(k: &SymMatrix) -> Option<Vec<usize>> {
    let cols = k.first().map_or(0, Vec::len);
    let mut rows = Vec::with_capacity(cols);
    for j in 0..cols {
        let mut hit = None;
        for (i, row) in k.iter().enumerate() {
            match row[j].as_const() {
                Some(v) if v == 0.0 => {}
                Some(v) if v == 1.0 && hit.is_none() => hit = Some(i),
                _ => return None,
            }
        }
        let i = hit?;
        if rows.contains(&i) {
            return None;
        }
        rows.push(i);
    }
    Some(rows)
}

/// `(KᵀK)⁻¹Kᵀ` for a full-column-rank `k`.
pub fn left_inverse(k: &SymMatrix) -> Result<SymMatrix> {
    let rows = k.len();
    if let Some(sel) = coordinate_columns(k) {
        return Ok(sel
            .iter()
            .map(|&i| (0..rows).map(|r| if r == i { Expr::one() } else { Expr::zero() }).collect())
            .collect());
    }
    let kt = transpose(k);
    Ok(mul(&inverse(&mul(&kt, k))?, &kt))
}

/// `Pᵀ(PPᵀ)⁻¹` for a full-row-rank `p`.
pub fn right_inverse(p: &SymMatrix) -> Result<SymMatrix> {
    let pt = transpose(p);
    Ok(mul(&pt, &inverse(&mul(p, &pt))?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Env;

    fn parse(rows: &[&[&str]]) -> SymMatrix {
        rows.iter()
            .map(|r| r.iter().map(|s| Expr::parse(s).unwrap()).collect())
            .collect()
    }

    fn eval(a: &SymMatrix, env: &Env) -> Vec<Vec<f64>> {
        a.iter()
            .map(|r| r.iter().map(|e| e.eval(env).unwrap()).collect())
            .collect()
    }

    #[test]
    fn inverse_times_matrix_is_identity() {
        let a = parse(&[&["1 + x^2", "y", "0"], &["x", "2", "sin(y)"], &["0", "1", "3"]]);
        let inv = inverse(&a).unwrap();
        let env: Env = [("x".to_string(), 0.4), ("y".to_string(), -1.1)].into();
        let prod = eval(&mul(&inv, &a), &env);
        for (i, row) in prod.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((v - target).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn right_inverse_of_projection() {
        let p = parse(&[&["0", "1", "x", "0"], &["0", "0", "0", "1"]]);
        let s = right_inverse(&p).unwrap();
        let env: Env = [("x".to_string(), 2.0)].into();
        let prod = eval(&mul(&p, &s), &env);
        assert!((prod[0][0] - 1.0).abs() < 1e-14 && prod[0][1].abs() < 1e-14);
        assert!((prod[1][1] - 1.0).abs() < 1e-14 && prod[1][0].abs() < 1e-14);
    }

    #[test]
    fn coordinate_kernel_frames_use_selection() {
        let k = parse(&[&["1"], &["0"], &["0"]]);
        assert_eq!(coordinate_columns(&k), Some(vec![0]));
        let l = left_inverse(&k).unwrap();
        assert_eq!(l, parse(&[&["1", "0", "0"]]));
    }
}
