mod common;

use std::sync::Arc;

use common::rng;
use dsfusion::autodiff::{grad_check, AdError, ParamValue, Tape, Var};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

const POINTS: u64 = 100;
const H: f64 = 1e-5;
const TOL: f64 = 1e-6;

type Build = dyn Fn(&mut Tape, &[Var]) -> Var;

/// Contracts the op's output with fixed random weights so the function is scalar.
fn evaluate(build: &Build, params: &[ParamValue], weights: &[f64]) -> (Tape, Var) {
    let mut t = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| t.param(p).unwrap()).collect();
    let out = build(&mut t, &vars);
    let w = t.constant(weights.to_vec());
    let s = t.dot(out, w).unwrap();
    (t, s)
}

/// Worst relative deviation between the adjoint and a central difference.
fn fd_error(build: &Build, params: &[ParamValue], out_len: usize, r: &mut ChaCha8Rng) -> f64 {
    let weights: Vec<f64> = (0..out_len).map(|_| r.random_range(-1.0..1.0)).collect();
    let (t, s) = evaluate(build, params, &weights);
    let grads = t.backward(s).unwrap();
    let mut worst: f64 = 0.0;
    let mut work = params.to_vec();
    for (pi, p) in params.iter().enumerate() {
        let g = grads.get(&p.name).unwrap();
        for (k, &x) in p.values.iter().enumerate() {
            work[pi].values[k] = x + H;
            let (t1, s1) = evaluate(build, &work, &weights);
            work[pi].values[k] = x - H;
            let (t2, s2) = evaluate(build, &work, &weights);
            work[pi].values[k] = x;
            let fd = (t1.scalar(s1) - t2.scalar(s2)) / (2.0 * H);
            worst = worst.max((g[k] - fd).abs() / fd.abs().max(1.0));
        }
    }
    worst
}

/// Values away from zero by at least `margin`, to stay clear of kinks.
fn vals(r: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64, margin: f64) -> Vec<f64> {
    (0..n)
        .map(|_| loop {
            let v = r.random_range(lo..hi);
            if v.abs() >= margin {
                break v;
            }
        })
        .collect()
}

fn check(name: &str, gen: impl Fn(&mut ChaCha8Rng) -> (Vec<ParamValue>, usize, Box<Build>)) {
    let mut worst: f64 = 0.0;
    for seed in 0..POINTS {
        let mut r = rng(seed ^ 0x5eed);
        let (params, out_len, build) = gen(&mut r);
        worst = worst.max(fd_error(build.as_ref(), &params, out_len, &mut r));
    }
    assert!(worst < TOL, "{name}: worst relative error {worst:e}");
}

fn vecp(name: &str, v: Vec<f64>) -> ParamValue {
    ParamValue::vector(name, v)
}

#[test]
fn elementwise_binary_ops() {
    check("add", |r| {
        (
            vec![vecp("a", vals(r, 4, -2.0, 2.0, 0.0)), vecp("b", vals(r, 4, -2.0, 2.0, 0.0))],
            4,
            Box::new(|t, v| t.add(v[0], v[1]).unwrap()),
        )
    });
    check("sub", |r| {
        (
            vec![vecp("a", vals(r, 4, -2.0, 2.0, 0.0)), vecp("b", vals(r, 4, -2.0, 2.0, 0.0))],
            4,
            Box::new(|t, v| t.sub(v[0], v[1]).unwrap()),
        )
    });
    check("mul", |r| {
        (
            vec![vecp("a", vals(r, 4, -2.0, 2.0, 0.0)), vecp("b", vals(r, 4, -2.0, 2.0, 0.0))],
            4,
            Box::new(|t, v| t.mul(v[0], v[1]).unwrap()),
        )
    });
    check("div", |r| {
        (
            vec![vecp("a", vals(r, 4, -2.0, 2.0, 0.0)), vecp("b", vals(r, 4, 0.5, 2.0, 0.0))],
            4,
            Box::new(|t, v| t.div(v[0], v[1]).unwrap()),
        )
    });
    check("mul broadcast", |r| {
        (
            vec![vecp("a", vals(r, 3, -2.0, 2.0, 0.0)), vecp("s", vals(r, 1, -2.0, 2.0, 0.0))],
            3,
            Box::new(|t, v| t.mul(v[0], v[1]).unwrap()),
        )
    });
    check("div broadcast", |r| {
        (
            vec![vecp("a", vals(r, 3, -2.0, 2.0, 0.0)), vecp("s", vals(r, 1, 0.5, 2.0, 0.0))],
            3,
            Box::new(|t, v| t.div(v[0], v[1]).unwrap()),
        )
    });
}

#[test]
fn elementwise_unary_ops() {
    check("exp", |r| {
        (vec![vecp("x", vals(r, 5, -3.0, 3.0, 0.0))], 5, Box::new(|t, v| t.exp(v[0])))
    });
    check("log", |r| {
        (
            vec![vecp("x", vals(r, 5, 0.2, 5.0, 0.0))],
            5,
            Box::new(|t, v| t.log(v[0]).unwrap()),
        )
    });
    check("neg", |r| {
        (vec![vecp("x", vals(r, 5, -3.0, 3.0, 0.0))], 5, Box::new(|t, v| t.neg(v[0])))
    });
    check("relu", |r| {
        (vec![vecp("x", vals(r, 5, -3.0, 3.0, 1e-3))], 5, Box::new(|t, v| t.relu(v[0])))
    });
    check("sigmoid", |r| {
        (
            vec![vecp("x", vals(r, 5, -6.0, 6.0, 0.0))],
            5,
            Box::new(|t, v| t.sigmoid(v[0])),
        )
    });
    check("clamp_min", |r| {
        (
            vec![vecp("x", vals(r, 5, -3.0, 3.0, 1e-3))],
            5,
            Box::new(|t, v| t.clamp_min(v[0], 0.0)),
        )
    });
}

#[test]
fn reductions_and_products() {
    check("sum", |r| {
        (vec![vecp("x", vals(r, 6, -3.0, 3.0, 0.0))], 1, Box::new(|t, v| t.sum(v[0])))
    });
    check("dot", |r| {
        (
            vec![vecp("a", vals(r, 6, -2.0, 2.0, 0.0)), vecp("b", vals(r, 6, -2.0, 2.0, 0.0))],
            1,
            Box::new(|t, v| t.dot(v[0], v[1]).unwrap()),
        )
    });
    check("outer", |r| {
        (
            vec![vecp("a", vals(r, 3, -2.0, 2.0, 0.0)), vecp("b", vals(r, 4, -2.0, 2.0, 0.0))],
            12,
            Box::new(|t, v| t.outer(v[0], v[1])),
        )
    });
    check("affine", |r| {
        let w = ParamValue::matrix("w", 3, 4, vals(r, 12, -1.0, 1.0, 0.0));
        (
            vec![
                w,
                vecp("b", vals(r, 3, -1.0, 1.0, 0.0)),
                vecp("x", vals(r, 4, -2.0, 2.0, 0.0)),
            ],
            3,
            Box::new(|t, v| t.affine(v[0], v[1], v[2]).unwrap()),
        )
    });
    check("squared_distance", |r| {
        let w = ParamValue::matrix("w", 4, 3, vals(r, 12, -2.0, 2.0, 0.0));
        (
            vec![vecp("x", vals(r, 3, -2.0, 2.0, 0.0)), w],
            4,
            Box::new(|t, v| t.squared_distance(v[0], v[1]).unwrap()),
        )
    });
}

#[test]
fn normalizing_ops() {
    check("softmax", |r| {
        (
            vec![vecp("x", vals(r, 5, -3.0, 3.0, 0.0))],
            5,
            Box::new(|t, v| t.softmax(v[0])),
        )
    });
    check("softmax rows", |r| {
        (
            vec![ParamValue::matrix("x", 2, 3, vals(r, 6, -3.0, 3.0, 0.0))],
            6,
            Box::new(|t, v| t.softmax(v[0])),
        )
    });
    check("normalize_by_sum", |r| {
        (
            vec![vecp("x", vals(r, 5, 0.1, 2.0, 0.0))],
            5,
            Box::new(|t, v| t.normalize_by_sum(v[0]).unwrap()),
        )
    });
}

#[test]
fn structural_ops() {
    check("concat", |r| {
        (
            vec![vecp("a", vals(r, 2, -2.0, 2.0, 0.0)), vecp("b", vals(r, 3, -2.0, 2.0, 0.0))],
            7,
            Box::new(|t, v| t.concat(&[v[0], v[1], v[0]])),
        )
    });
    check("slice", |r| {
        (
            vec![vecp("x", vals(r, 6, -2.0, 2.0, 0.0))],
            3,
            Box::new(|t, v| t.slice(v[0], 2, 3).unwrap()),
        )
    });
    check("index", |r| {
        (
            vec![vecp("x", vals(r, 6, -2.0, 2.0, 0.0))],
            1,
            Box::new(|t, v| t.index(v[0], 4).unwrap()),
        )
    });
    check("row", |r| {
        (
            vec![ParamValue::matrix("m", 3, 2, vals(r, 6, -2.0, 2.0, 0.0))],
            2,
            Box::new(|t, v| t.row(v[0], 1).unwrap()),
        )
    });
    check("sparse_linear", |r| {
        let entries: Arc<[(usize, usize, f64)]> = (0..8)
            .map(|_| (r.random_range(0..3), r.random_range(0..5), r.random_range(-1.0..1.0)))
            .collect();
        (
            vec![vecp("x", vals(r, 5, -2.0, 2.0, 0.0))],
            3,
            Box::new(move |t, v| t.sparse_linear(v[0], entries.clone(), 3).unwrap()),
        )
    });
}

#[test]
fn composed_network_passes_grad_check() {
    for seed in 0..10 {
        let mut r = rng(seed);
        let params = vec![
            ParamValue::matrix("w1", 4, 3, vals(&mut r, 12, -1.0, 1.0, 0.0)),
            vecp("b1", vals(&mut r, 4, -0.5, 0.5, 0.0)),
            ParamValue::matrix("w2", 2, 4, vals(&mut r, 8, -1.0, 1.0, 0.0)),
            vecp("b2", vals(&mut r, 2, -0.5, 0.5, 0.0)),
        ];
        let x = vals(&mut r, 3, -2.0, 2.0, 0.0);
        let check = grad_check(
            |t, v| -> Result<Var, AdError> {
                let xv = t.constant(x.clone());
                let h = t.affine(v[0], v[1], xv)?;
                let h = t.sigmoid(h);
                let o = t.affine(v[2], v[3], h)?;
                let p = t.softmax(o);
                let first = t.index(p, 0)?;
                let l = t.log(first)?;
                Ok(t.neg(l))
            },
            &params,
            1e-5,
        )
        .unwrap();
        assert!(check.max_rel_error < 1e-4, "{check:?}");
    }
}

#[test]
fn repeated_backward_passes_agree() {
    let mut t = Tape::new();
    let a = t.param(&vecp("a", vec![0.3, -1.2, 2.0])).unwrap();
    let e = t.exp(a);
    let n = t.normalize_by_sum(e).unwrap();
    let l = t.log(n).unwrap();
    let s = t.sum(l);
    let g1 = t.backward(s).unwrap();
    let g2 = t.backward(s).unwrap();
    assert_eq!(g1.get("a"), g2.get("a"));
}

#[test]
fn loss_is_stationary_when_label_probability_is_one() {
    // BetP(A) = p1 + p2 with p = normalize(x); A covers every class with mass
    let mut t = Tape::new();
    let x = t.param(&vecp("x", vec![0.4, 0.6, 0.0])).unwrap();
    let p = t.normalize_by_sum(x).unwrap();
    let ind = t.constant(vec![1.0, 1.0, 0.0]);
    let pa = t.dot(p, ind).unwrap();
    let l = t.log(pa).unwrap();
    let loss = t.neg(l);
    let g = t.backward(loss).unwrap();
    let gx = g.get("x").unwrap();
    assert!(gx[0].abs() < 1e-15 && gx[1].abs() < 1e-15, "{gx:?}");
}
