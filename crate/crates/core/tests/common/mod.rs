//! Shared oracles and generators for integration and acceptance tests.
#![allow(dead_code, clippy::needless_range_loop)]

use rand::Rng;
use tracksim::dynamics::{BodyId, Twist};
use tracksim::math::{Matrix3, Vector3};
use tracksim::solver::{BodySnapshot, ConstraintRow, LcpProblem, RowKind};
use tracksim::Vec3;

fn normal3<R: Rng>(rng: &mut R) -> Vec3 {
    Vec3::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    )
}

fn unit<R: Rng>(rng: &mut R) -> Vec3 {
    loop {
        let v = normal3(rng);
        if v.norm() > 0.2 && v.norm() < 1.0 {
            return v.normalize();
        }
    }
}

fn snapshot<R: Rng>(rng: &mut R, dynamic: bool) -> BodySnapshot<f64> {
    if !dynamic {
        return BodySnapshot {
            inv_mass: 0.0,
            inv_inertia: Matrix3::zeros(),
            com: Vec3::zeros(),
            velocity: Twist::zero(),
        };
    }
    let d = Vec3::new(
        rng.random_range(1.0..10.0),
        rng.random_range(1.0..10.0),
        rng.random_range(1.0..10.0),
    );
    BodySnapshot {
        inv_mass: rng.random_range(0.2..2.0),
        inv_inertia: Matrix3::diagonal(d),
        com: normal3(rng),
        velocity: Twist {
            linear: normal3(rng),
            angular: normal3(rng),
        },
    }
}

fn blank(kind: RowKind, b1: usize, b2: usize) -> ConstraintRow<f64> {
    ConstraintRow {
        kind,
        body1: BodyId(b1),
        body2: BodyId(b2),
        j1_lin: Vec3::zeros(),
        j1_ang: Vec3::zeros(),
        j2_lin: Vec3::zeros(),
        j2_ang: Vec3::zeros(),
        rhs: 0.0,
        lower: 0.0,
        upper: f64::INFINITY,
        coupling: None,
        mu: 0.0,
        cone_partner: None,
        softness: 1e-9,
        bias: 0.0,
    }
}

/// Random problem with fixed bounds: unilateral, bilateral and boxed rows
/// between bodies 1 and 2, or body 1 and the static body 0.
pub fn random_box_problem<R: Rng>(rng: &mut R, max_rows: usize) -> LcpProblem<f64> {
    let bodies = vec![snapshot(rng, false), snapshot(rng, true), snapshot(rng, true)];
    let mut p = LcpProblem::new(bodies, 0.01);
    let n = rng.random_range(1..=max_rows);
    for _ in 0..n {
        let (b1, b2) = if rng.random_bool(0.5) { (1, 2) } else { (0, 1) };
        let (kind, lower, upper) = match rng.random_range(0..3) {
            0 => (RowKind::Normal, 0.0, f64::INFINITY),
            1 => (RowKind::JointLinear, f64::NEG_INFINITY, f64::INFINITY),
            _ => {
                let m = rng.random_range(0.05..2.0);
                (RowKind::Motor, -m, m)
            }
        };
        let mut r = blank(kind, b1, b2);
        r.lower = lower;
        r.upper = upper;
        r.j1_lin = normal3(rng);
        r.j1_ang = normal3(rng);
        r.j2_lin = normal3(rng);
        r.j2_ang = normal3(rng);
        if b1 == 0 {
            r.j1_lin = Vec3::zeros();
            r.j1_ang = Vec3::zeros();
        }
        r.rhs = rng.random_range(-1.0..1.0);
        p.rows.push(r);
    }
    p
}

/// Random ground contacts of body 1 against the static body 0, each with a
/// normal row and two pyramid friction rows. Normals lie within 30° of +z and
/// contact points below the centre of mass, which keeps the problems clear of
/// frictional jamming.
pub fn random_contact_problem<R: Rng>(rng: &mut R, contacts: usize) -> LcpProblem<f64> {
    let bodies = vec![snapshot(rng, false), snapshot(rng, true)];
    let com = bodies[1].com;
    let mut p = LcpProblem::new(bodies, 0.01);
    let mut triples = Vec::new();
    for _ in 0..contacts {
        let n = loop {
            let n = unit(rng);
            if n.z > 30f64.to_radians().cos() {
                break n;
            }
        };
        let t1 = n.any_perpendicular().normalize();
        let t2 = n.cross(&t1);
        let pos = com
            + Vec3::new(
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.5..0.5),
                -rng.random_range(0.1..0.5),
            );
        let r = pos - com;
        let mu = rng.random_range(0.1..0.8);
        let make = |kind: RowKind, d: Vec3| {
            let mut row = blank(kind, 0, 1);
            row.j2_lin = d;
            row.j2_ang = r.cross(&d);
            row
        };
        let mut nr = make(RowKind::Normal, n);
        nr.bias = rng.random_range(0.0..0.5);
        let mut f1 = make(RowKind::Friction1, t1);
        let mut f2 = make(RowKind::Friction2, t2);
        for f in [&mut f1, &mut f2] {
            f.coupling = Some(0);
            f.mu = mu;
            f.upper = 0.0;
            f.rhs = rng.random_range(-0.5..0.5);
        }
        triples.push([nr, f1, f2]);
    }
    p.add_contact_rows(triples);
    p
}

/// Dense `A = J M⁻¹ Jᵀ` and `b = target − J v₀`.
pub fn dense(p: &LcpProblem<f64>) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = p.rows.len();
    let minv = |b: BodyId, lin: Vec3, ang: Vec3| -> (Vec3, Vec3) {
        let s = &p.bodies[b.0];
        (lin * s.inv_mass, s.inv_inertia.mul_vec(&ang))
    };
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        let ri = &p.rows[i];
        let (l1, a1) = minv(ri.body1, ri.j1_lin, ri.j1_ang);
        let (l2, a2) = minv(ri.body2, ri.j2_lin, ri.j2_ang);
        for j in 0..n {
            let rj = &p.rows[j];
            let mut s = 0.0;
            for (b, l, an) in [(ri.body1, l1, a1), (ri.body2, l2, a2)] {
                if rj.body1 == b {
                    s += rj.j1_lin.dot(&l) + rj.j1_ang.dot(&an);
                }
                if rj.body2 == b {
                    s += rj.j2_lin.dot(&l) + rj.j2_ang.dot(&an);
                }
            }
            a[i][j] = s;
        }
    }
    let b = p
        .rows
        .iter()
        .map(|r| {
            let v1 = p.bodies[r.body1.0].velocity;
            let v2 = p.bodies[r.body2.0].velocity;
            r.target() - r.velocity(&v1, &v2)
        })
        .collect();
    (a, b)
}

fn solve_linear(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let n = rhs.len();
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs()))?;
        if m[piv][c].abs() < 1e-12 {
            return None;
        }
        m.swap(c, piv);
        rhs.swap(c, piv);
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            if f != 0.0 {
                for k in c..n {
                    m[r][k] -= f * m[c][k];
                }
                rhs[r] -= f * rhs[c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for c in (0..n).rev() {
        let s: f64 = (c + 1..n).map(|k| m[c][k] * x[k]).sum();
        x[c] = (rhs[c] - s) / m[c][c];
    }
    Some(x)
}

#[derive(Clone, Copy, PartialEq)]
enum Active {
    Free,
    Lower,
    Upper,
}

/// Solves the bounded MLCP by enumerating every free/lower/upper assignment
/// (3ⁿ) and returning the first one that satisfies all conditions. Coupled
/// friction bounds ±μλₙ enter as linear equations.
pub fn enumerate_oracle(p: &LcpProblem<f64>) -> Option<Vec<f64>> {
    enumerate_all(p).into_iter().next()
}

/// Every solution found by enumeration. Coupled friction problems need not
/// have a unique solution.
pub fn enumerate_all(p: &LcpProblem<f64>) -> Vec<Vec<f64>> {
    let mut found = Vec::new();
    let n = p.rows.len();
    let (a, b) = dense(p);
    let tol = 1e-9;
    let mut state = vec![Active::Free; n];
    let total = 3usize.pow(n as u32);
    'outer: for code in 0..total {
        let mut c = code;
        for s in state.iter_mut() {
            *s = match c % 3 {
                0 => Active::Free,
                1 => Active::Lower,
                _ => Active::Upper,
            };
            c /= 3;
        }
        for (i, r) in p.rows.iter().enumerate() {
            let infinite = match state[i] {
                Active::Lower => r.coupling.is_none() && r.lower == f64::NEG_INFINITY,
                Active::Upper => r.coupling.is_none() && r.upper == f64::INFINITY,
                Active::Free => false,
            };
            if infinite {
                continue 'outer;
            }
        }
        let mut m = vec![vec![0.0; n]; n];
        let mut rhs = vec![0.0; n];
        for (i, r) in p.rows.iter().enumerate() {
            match (state[i], r.coupling) {
                (Active::Free, _) => {
                    m[i] = a[i].clone();
                    m[i][i] += r.softness;
                    rhs[i] = b[i];
                }
                (s, Some(k)) => {
                    let sign = if s == Active::Upper { 1.0 } else { -1.0 };
                    m[i][i] = 1.0;
                    m[i][k] -= sign * r.mu;
                }
                (Active::Lower, None) => {
                    m[i][i] = 1.0;
                    rhs[i] = r.lower;
                }
                (Active::Upper, None) => {
                    m[i][i] = 1.0;
                    rhs[i] = r.upper;
                }
            }
        }
        let Some(x) = solve_linear(m, rhs) else { continue };
        for (i, r) in p.rows.iter().enumerate() {
            let w: f64 = (0..n).map(|j| a[i][j] * x[j]).sum::<f64>() + r.softness * x[i] - b[i];
            let (lo, hi) = match r.coupling {
                Some(k) => {
                    if x[k] < -tol {
                        continue 'outer;
                    }
                    let bnd = r.mu * x[k].max(0.0);
                    (-bnd, bnd)
                }
                None => (r.lower, r.upper),
            };
            let ok = match state[i] {
                Active::Free => x[i] >= lo - tol && x[i] <= hi + tol,
                Active::Lower => w >= -tol,
                Active::Upper => w <= tol,
            };
            if !ok {
                continue 'outer;
            }
        }
        found.push(x);
    }
    found
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn v3(x: f64, y: f64, z: f64) -> Vector3<f64> {
    Vector3::new(x, y, z)
}
