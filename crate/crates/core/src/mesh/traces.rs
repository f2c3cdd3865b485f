use crate::error::{Error, Result};

use super::Mesh2D;

/// Which face operator to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JumpKind {
    /// Normal jump `w|K1 . n_K1 + w|K2 . n_K2`.
    VectorDotN,
    /// Tensor jump `w|K1 (x) n_K1 + w|K2 (x) n_K2`.
    VectorTensorN,
    TensorAvg,
    VectorAvg,
    /// Plain difference `w|K1 - w|K2`.
    BracketJump,
}

/// One-sided trace of a vector or tensor field on a face.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Trace {
    Vector([f64; 2]),
    Tensor([[f64; 2]; 2]),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JumpValue {
    Scalar(f64),
    Vector([f64; 2]),
    Tensor([[f64; 2]; 2]),
}

fn vector(t: Trace) -> Result<[f64; 2]> {
    match t {
        Trace::Vector(v) => Ok(v),
        Trace::Tensor(_) => Err(Error::contract("expected a vector trace, got a tensor")),
    }
}

fn tensor(t: Trace) -> Result<[[f64; 2]; 2]> {
    match t {
        Trace::Tensor(m) => Ok(m),
        Trace::Vector(_) => Err(Error::contract("expected a tensor trace, got a vector")),
    }
}

fn outer(w: [f64; 2], n: [f64; 2]) -> [[f64; 2]; 2] {
    [[w[0] * n[0], w[0] * n[1]], [w[1] * n[0], w[1] * n[1]]]
}

/// Averages and jumps of element-wise traces on face `face`.
///
/// On a boundary face only `trace_k1` is used and the operators reduce to the
/// one-sided values (the plain difference becomes `w|K`).
pub fn jump_and_average(
    mesh: &Mesh2D,
    face: usize,
    trace_k1: Trace,
    trace_k2: Option<Trace>,
    kind: JumpKind,
) -> Result<JumpValue> {
    let f = mesh
        .faces()
        .get(face)
        .ok_or_else(|| Error::invalid(format!("face {face} out of range")))?;
    let n = f.normal;
    let k2 = match (f.is_boundary(), trace_k2) {
        (false, None) => {
            return Err(Error::contract(format!(
                "interior face {face} needs traces from both elements"
            )))
        }
        (true, Some(_)) => {
            return Err(Error::contract(format!(
                "boundary face {face} has a single adjacent element"
            )))
        }
        (_, t) => t,
    };
    Ok(match kind {
        JumpKind::VectorDotN => {
            let a = vector(trace_k1)?;
            let mut s = a[0] * n[0] + a[1] * n[1];
            if let Some(t) = k2 {
                let b = vector(t)?;
                s -= b[0] * n[0] + b[1] * n[1];
            }
            JumpValue::Scalar(s)
        }
        JumpKind::VectorTensorN => {
            let a = vector(trace_k1)?;
            let mut m = outer(a, n);
            if let Some(t) = k2 {
                let b = outer(vector(t)?, n);
                for i in 0..2 {
                    for j in 0..2 {
                        m[i][j] -= b[i][j];
                    }
                }
            }
            JumpValue::Tensor(m)
        }
        JumpKind::TensorAvg => {
            let a = tensor(trace_k1)?;
            match k2 {
                None => JumpValue::Tensor(a),
                Some(t) => {
                    let b = tensor(t)?;
                    let mut m = [[0.0; 2]; 2];
                    for i in 0..2 {
                        for j in 0..2 {
                            m[i][j] = 0.5 * (a[i][j] + b[i][j]);
                        }
                    }
                    JumpValue::Tensor(m)
                }
            }
        }
        JumpKind::VectorAvg => {
            let a = vector(trace_k1)?;
            match k2 {
                None => JumpValue::Vector(a),
                Some(t) => {
                    let b = vector(t)?;
                    JumpValue::Vector([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])])
                }
            }
        }
        JumpKind::BracketJump => {
            let a = vector(trace_k1)?;
            match k2 {
                None => JumpValue::Vector(a),
                Some(t) => {
                    let b = vector(t)?;
                    JumpValue::Vector([a[0] - b[0], a[1] - b[1]])
                }
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_uniform_quad_mesh, Rect};

    fn vertical_interior_face(mesh: &Mesh2D) -> usize {
        mesh.interior_faces()
            .find(|&f| (mesh.face(f).normal[0] - 1.0).abs() < 1e-14)
            .unwrap()
    }

    #[test]
    fn continuity() {
        let m = generate_uniform_quad_mesh(2, 1, Rect::unit()).unwrap();
        let f = vertical_interior_face(&m);
        let w = Trace::Vector([0.3, -1.2]);
        assert_eq!(
            jump_and_average(&m, f, w, Some(w), JumpKind::BracketJump).unwrap(),
            JumpValue::Vector([0.0, 0.0])
        );
        assert_eq!(
            jump_and_average(&m, f, w, Some(w), JumpKind::VectorAvg).unwrap(),
            JumpValue::Vector([0.3, -1.2])
        );
        assert_eq!(
            jump_and_average(&m, f, w, Some(w), JumpKind::VectorDotN).unwrap(),
            JumpValue::Scalar(0.0)
        );
    }

    #[test]
    fn normal_jump_by_hand() {
        let m = generate_uniform_quad_mesh(2, 1, Rect::unit()).unwrap();
        let f = vertical_interior_face(&m);
        let v = jump_and_average(
            &m,
            f,
            Trace::Vector([1.0, 0.0]),
            Some(Trace::Vector([0.0, 0.0])),
            JumpKind::VectorDotN,
        )
        .unwrap();
        assert_eq!(v, JumpValue::Scalar(1.0));
        let t = jump_and_average(
            &m,
            f,
            Trace::Vector([1.0, 2.0]),
            Some(Trace::Vector([0.0, 1.0])),
            JumpKind::VectorTensorN,
        )
        .unwrap();
        assert_eq!(t, JumpValue::Tensor([[1.0, 0.0], [1.0, 0.0]]));
    }

    #[test]
    fn boundary_single_trace() {
        let m = generate_uniform_quad_mesh(1, 1, Rect::unit()).unwrap();
        let w = Trace::Vector([2.0, 3.0]);
        assert_eq!(
            jump_and_average(&m, 0, w, None, JumpKind::VectorAvg).unwrap(),
            JumpValue::Vector([2.0, 3.0])
        );
        let tau = Trace::Tensor([[1.0, 2.0], [3.0, 4.0]]);
        assert_eq!(
            jump_and_average(&m, 0, tau, None, JumpKind::TensorAvg).unwrap(),
            JumpValue::Tensor([[1.0, 2.0], [3.0, 4.0]])
        );
    }

    #[test]
    fn missing_trace_is_contract_violation() {
        let m = generate_uniform_quad_mesh(2, 1, Rect::unit()).unwrap();
        let f = vertical_interior_face(&m);
        let err = jump_and_average(&m, f, Trace::Vector([1.0, 0.0]), None, JumpKind::VectorAvg);
        assert!(matches!(err, Err(Error::Contract(_))));
    }
}
