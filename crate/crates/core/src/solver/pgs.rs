use super::{ConstraintRow, LcpProblem, LcpSolution, SolverError};
use crate::math::Vector3;
use crate::scalar::Scalar;

struct Prepared<T> {
    // M⁻¹Jᵀ blocks
    m1_lin: Vector3<T>,
    m1_ang: Vector3<T>,
    m2_lin: Vector3<T>,
    m2_ang: Vector3<T>,
    inv_diag: T,
}

/// Projected Gauss-Seidel over the rows of `p` in order.
///
/// Stops after `max_iters` sweeps or once the largest impulse change of a
/// sweep falls below `tol`.
pub fn solve_pgs<T: Scalar>(p: &LcpProblem<T>, max_iters: usize, tol: T) -> Result<LcpSolution<T>, SolverError> {
    let n = p.rows.len();
    let mut lambda = vec![T::zero(); n];
    if p.initial_lambda.len() == n {
        lambda.copy_from_slice(&p.initial_lambda);
    }
    if n == 0 {
        return Ok(LcpSolution {
            lambda,
            iterations_used: 0,
            residual: T::zero(),
        });
    }

    let prepared: Vec<Prepared<T>> = p
        .rows
        .iter()
        .map(|r| {
            let b1 = &p.bodies[r.body1.0];
            let b2 = &p.bodies[r.body2.0];
            let m1_lin = r.j1_lin * b1.inv_mass;
            let m1_ang = b1.inv_inertia.mul_vec(&r.j1_ang);
            let m2_lin = r.j2_lin * b2.inv_mass;
            let m2_ang = b2.inv_inertia.mul_vec(&r.j2_ang);
            let diag = r.j1_lin.dot(&m1_lin)
                + r.j1_ang.dot(&m1_ang)
                + r.j2_lin.dot(&m2_lin)
                + r.j2_ang.dot(&m2_ang)
                + r.softness;
            let inv_diag = if diag > T::zero() { T::one() / diag } else { T::zero() };
            Prepared {
                m1_lin,
                m1_ang,
                m2_lin,
                m2_ang,
                inv_diag,
            }
        })
        .collect();

    let mut vel: Vec<(Vector3<T>, Vector3<T>)> = p
        .bodies
        .iter()
        .map(|b| (b.velocity.linear, b.velocity.angular))
        .collect();
    let apply = |vel: &mut Vec<(Vector3<T>, Vector3<T>)>, i: usize, d: T| {
        let r = &p.rows[i];
        let q = &prepared[i];
        let v1 = &mut vel[r.body1.0];
        v1.0 += q.m1_lin * d;
        v1.1 += q.m1_ang * d;
        let v2 = &mut vel[r.body2.0];
        v2.0 += q.m2_lin * d;
        v2.1 += q.m2_ang * d;
    };
    for i in 0..n {
        if lambda[i] != T::zero() {
            apply(&mut vel, i, lambda[i]);
        }
    }

    let mut iterations = 0;
    for it in 0..max_iters {
        iterations = it + 1;
        let mut max_change = T::zero();
        for i in 0..n {
            let r = &p.rows[i];
            let q = &prepared[i];
            // cone pairs are updated together at their second row
            if let (Some(j), Some(nrm)) = (r.cone_partner, r.coupling) {
                if j < i {
                    let change = cone_pair_update(p, &prepared, &mut vel, &mut lambda, j, i, nrm, &apply);
                    max_change = max_change.max(change);
                }
                continue;
            }
            if q.inv_diag == T::zero() {
                continue;
            }
            let delta = (r.target() - row_velocity(r, &vel) - r.softness * lambda[i]) * q.inv_diag;
            let (lo, hi) = r.bounds(&lambda);
            let old = lambda[i];
            let new = (old + delta).max(lo).min(hi);
            if !new.is_finite() {
                return Err(SolverError::NonFinite {
                    row: i,
                    kind: r.kind,
                    body1: r.body1,
                    body2: r.body2,
                    iteration: iterations,
                });
            }
            if new != old {
                apply(&mut vel, i, new - old);
                lambda[i] = new;
            }
            max_change = max_change.max((new - old).abs());
        }
        if let Some(i) = lambda.iter().position(|l| !l.is_finite()) {
            let r = &p.rows[i];
            return Err(SolverError::NonFinite {
                row: i,
                kind: r.kind,
                body1: r.body1,
                body2: r.body2,
                iteration: iterations,
            });
        }
        if max_change < tol {
            break;
        }
    }

    let residual = p.residual(&lambda);
    Ok(LcpSolution {
        lambda,
        iterations_used: iterations,
        residual,
    })
}

fn row_velocity<T: Scalar>(r: &ConstraintRow<T>, vel: &[(Vector3<T>, Vector3<T>)]) -> T {
    let (v1, w1) = vel[r.body1.0];
    let (v2, w2) = vel[r.body2.0];
    r.j1_lin.dot(&v1) + r.j1_ang.dot(&w1) + r.j2_lin.dot(&v2) + r.j2_ang.dot(&w2)
}

/// Joint step on a friction pair with a common step length, then radial
/// scaling into the ellipse `(λa/μa)² + (λb/μb)² ≤ λn²`. Returns the largest
/// impulse change.
#[allow(clippy::too_many_arguments)]
fn cone_pair_update<T: Scalar, F>(
    p: &LcpProblem<T>,
    prepared: &[Prepared<T>],
    vel: &mut Vec<(Vector3<T>, Vector3<T>)>,
    lambda: &mut [T],
    a: usize,
    b: usize,
    nrm: usize,
    apply: &F,
) -> T
where
    F: Fn(&mut Vec<(Vector3<T>, Vector3<T>)>, usize, T),
{
    let (ra, rb) = (&p.rows[a], &p.rows[b]);
    let step = prepared[a].inv_diag.min(prepared[b].inv_diag);
    if step == T::zero() {
        return T::zero();
    }
    let wa = row_velocity(ra, vel) - ra.target() + ra.softness * lambda[a];
    let wb = row_velocity(rb, vel) - rb.target() + rb.softness * lambda[b];
    let (oa, ob) = (lambda[a], lambda[b]);
    let (mut na, mut nb) = (oa - wa * step, ob - wb * step);
    let ln = lambda[nrm].max(T::zero());
    let e = ratio(na, ra.mu) + ratio(nb, rb.mu);
    let limit = ln * ln;
    if e > limit {
        let s = if limit > T::zero() {
            (limit / e).sqrt()
        } else {
            T::zero()
        };
        na *= s;
        nb *= s;
    }
    apply(vel, a, na - oa);
    apply(vel, b, nb - ob);
    lambda[a] = na;
    lambda[b] = nb;
    (na - oa).abs().max((nb - ob).abs())
}

fn ratio<T: Scalar>(l: T, mu: T) -> T {
    if mu > T::zero() {
        (l / mu) * (l / mu)
    } else if l == T::zero() {
        T::zero()
    } else {
        T::infinity()
    }
}
