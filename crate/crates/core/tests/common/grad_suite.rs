use super::gradcheck::{check_inputs, check_params, random_tensor, rng, spread_tensor};
use rand::Rng;
use smartaug::engine::{ChannelStats, Mode, Padding, ParamStore, Tape, Tensor, Var, BN_EPSILON};
use smartaug::models::{build_network_a, build_network_b1, AugmenterArch, ClassifierArch};

/// `sum(y ⊙ r)` for a fixed random `r`, so every output element matters differently.
fn weighted(tape: &mut Tape<'_>, y: Var, seed: u64) -> Var {
    let r = random_tensor(tape.value(y).shape(), &mut rng(seed));
    let r = tape.input(r);
    let p = tape.mul(y, r).unwrap();
    tape.sum(p).unwrap()
}

/// Worst relative error of each named check.
pub type Report = Vec<(String, f64)>;

fn record(r: &mut Report, name: impl Into<String>, err: f64) {
    r.push((name.into(), err));
}

pub fn conv2d_same_and_valid(r: &mut Report) {
    let mut g = rng(1);
    let ins = [random_tensor(&[2, 2, 5, 5], &mut g), random_tensor(&[3, 2, 3, 3], &mut g), random_tensor(&[3], &mut g)];
    for padding in [Padding::Same, Padding::Valid] {
        let err = check_inputs(&ins, |t, v| {
            let y = t.conv2d(v[0], v[1], v[2], padding).unwrap();
            weighted(t, y, 2)
        });
        record(r, "conv2d", err);
    }
}

pub fn maxpool(r: &mut Report) {
    let x = spread_tensor(&[2, 2, 4, 6], &mut rng(3));
    record(r, 
        "maxpool2d",
        check_inputs(&[x], |t, v| {
            let y = t.maxpool2d(v[0]).unwrap();
            weighted(t, y, 4)
        }),
    );
}

pub fn batchnorm_train_and_infer(r: &mut Report) {
    let mut g = rng(5);
    let ins = [random_tensor(&[3, 2, 2, 3], &mut g), random_tensor(&[2], &mut g), random_tensor(&[2], &mut g)];
    record(r, 
        "batchnorm2d_train",
        check_inputs(&ins, |t, v| {
            let (y, _) = t.batchnorm2d_train(v[0], v[1], v[2], BN_EPSILON).unwrap();
            weighted(t, y, 6)
        }),
    );
    let stats = ChannelStats {
        mean: vec![0.1, -0.2],
        var: vec![0.5, 1.5],
    };
    record(r, 
        "batchnorm2d_infer",
        check_inputs(&ins, |t, v| {
            let y = t.batchnorm2d_infer(v[0], v[1], v[2], &stats, BN_EPSILON).unwrap();
            weighted(t, y, 7)
        }),
    );
}

pub fn dense(r: &mut Report) {
    let mut g = rng(8);
    let ins = [random_tensor(&[3, 4], &mut g), random_tensor(&[4, 5], &mut g), random_tensor(&[5], &mut g)];
    record(r, 
        "dense",
        check_inputs(&ins, |t, v| {
            let y = t.dense(v[0], v[1], v[2]).unwrap();
            weighted(t, y, 9)
        }),
    );
}

pub fn elementwise_ops(r: &mut Report) {
    let mut g = rng(10);
    let x = spread_tensor(&[3, 4], &mut g);
    let z = random_tensor(&[3, 4], &mut g);
    let unary: [(&str, fn(&mut Tape<'_>, Var) -> Var); 6] = [
        ("relu", |t, x| t.relu(x).unwrap()),
        ("sigmoid", |t, x| t.sigmoid(x).unwrap()),
        ("scale", |t, x| t.scale(x, -1.7).unwrap()),
        ("reshape", |t, x| t.reshape(x, &[2, 6]).unwrap()),
        ("flatten", |t, x| {
            let r = t.reshape(x, &[3, 2, 2]).unwrap();
            t.flatten(r).unwrap()
        }),
        ("dropout", |t, x| t.dropout(x, 0.4, Mode::Train, &mut rng(11)).unwrap()),
    ];
    for (name, op) in unary {
        record(r, name, check_inputs(std::slice::from_ref(&x), |t, v| {
            let y = op(t, v[0]);
            weighted(t, y, 12)
        }));
    }
    let pair = [x.clone(), z.clone()];
    record(r, "add", check_inputs(&pair, |t, v| {
        let y = t.add(v[0], v[1]).unwrap();
        weighted(t, y, 13)
    }));
    record(r, "mul", check_inputs(&pair, |t, v| {
        let y = t.mul(v[0], v[1]).unwrap();
        weighted(t, y, 14)
    }));
    record(r, "concat", check_inputs(&pair, |t, v| {
        let y = t.concat(&[v[0], v[1], v[0]]).unwrap();
        weighted(t, y, 15)
    }));
    record(r, "sum", check_inputs(std::slice::from_ref(&z), |t, v| t.sum(v[0]).unwrap()));
}

pub fn losses(r: &mut Report) {
    let mut g = rng(16);
    let logits = random_tensor(&[4, 3], &mut g).reshaped(&[4, 3]).unwrap();
    let scaled = Tensor::new(vec![4, 3], logits.data().iter().map(|v| v * 3.0).collect()).unwrap();
    record(r, "softmax_cross_entropy", check_inputs(&[scaled], |t, v| t.softmax_cross_entropy(v[0], &[0, 2, 1, 2]).unwrap()));
    let pair = [random_tensor(&[2, 1, 3, 3], &mut g), random_tensor(&[2, 1, 3, 3], &mut g)];
    record(r, "mse", check_inputs(&pair, |t, v| t.mse(v[0], v[1]).unwrap()));
}

pub fn random_three_op_chains(r: &mut Report) {
    type Op = fn(&mut Tape<'_>, Var) -> Var;
    let ops: [(&str, Op); 7] = [
        ("relu", |t, x| t.relu(x).unwrap()),
        ("sigmoid", |t, x| t.sigmoid(x).unwrap()),
        ("scale", |t, x| t.scale(x, 1.3).unwrap()),
        ("square", |t, x| t.mul(x, x).unwrap()),
        ("double", |t, x| t.add(x, x).unwrap()),
        ("concat", |t, x| t.concat(&[x, x]).unwrap()),
        ("flatten", |t, x| t.flatten(x).unwrap()),
    ];
    for seed in 0..10 {
        let mut g = rng(100 + seed);
        let chain: Vec<usize> = (0..3).map(|_| g.gen_range(0..ops.len())).collect();
        let x = spread_tensor(&[2, 3], &mut g);
        let err = check_inputs(&[x], |t, v| {
            let mut h = v[0];
            for &i in &chain {
                h = ops[i].1(t, h);
            }
            weighted(t, h, 200 + seed)
        });
        let names: Vec<&str> = chain.iter().map(|&i| ops[i].0).collect();
        record(r, format!("chain {names:?} (seed {seed})"), err);
    }
}

pub fn tiny_network_a(r: &mut Report) {
    let mut store = ParamStore::new();
    let mut g = rng(20);
    let a = build_network_a(&mut store, "a", 2, 1, (8, 8), AugmenterArch { hidden_filters: 2 }, &mut g).unwrap();
    let x = random_tensor(&[2, 2, 8, 8], &mut g);
    let target = random_tensor(&[2, 1, 8, 8], &mut g);
    let loss = |t: &mut Tape<'_>, xv: Var| {
        let y = a.clone().forward(t, xv, Mode::Train, &mut rng(0)).unwrap();
        let tv = t.input(target.clone());
        t.mse(y, tv).unwrap()
    };
    record(r, "network A params", check_params(&store, |t| {
        let xv = t.input(x.clone());
        loss(t, xv)
    }));
    record(r, "network A input", check_params_and_input(&store, &x, |t, v| loss(t, v[0])));
}

/// Input-gradient check for a function that reads network parameters.
fn check_params_and_input(store: &ParamStore, x: &Tensor, f: impl Fn(&mut Tape<'_>, &[Var]) -> Var) -> f64 {
    use super::gradcheck::{relative_error, STEP};
    let eval = |xt: &Tensor| {
        let mut t = Tape::new(store);
        let v = t.leaf(xt.clone().with_requires_grad(true));
        let out = f(&mut t, &[v]);
        t.value(out).item().unwrap()
    };
    let mut t = Tape::new(store);
    let v = t.leaf(x.clone().with_requires_grad(true));
    let out = f(&mut t, &[v]);
    let analytic = t.backward(out).unwrap().of(v).unwrap().to_vec();
    let numeric: Vec<f64> = (0..x.numel())
        .map(|j| {
            let mut up = x.clone();
            up.data_mut()[j] += STEP;
            let mut down = x.clone();
            down.data_mut()[j] -= STEP;
            (eval(&up) - eval(&down)) / (2.0 * STEP)
        })
        .collect();
    relative_error(&analytic, &numeric)
}

pub fn tiny_network_b1(r: &mut Report) {
    let mut store = ParamStore::new();
    let mut g = rng(30);
    let arch = ClassifierArch {
        conv1_filters: 2,
        conv2_filters: 2,
        dense_units: 4,
        dropout: 0.5,
    };
    let b = build_network_b1(&mut store, "b", 1, 2, (8, 8), arch, &mut g).unwrap();
    let x = random_tensor(&[3, 1, 8, 8], &mut g);
    let labels = [0, 1, 1];
    let f = |t: &mut Tape<'_>, xv: Var| {
        let logits = b.clone().forward(t, xv, Mode::Train, &mut rng(1)).unwrap();
        t.softmax_cross_entropy(logits, &labels).unwrap()
    };
    record(r, "network B1 params", check_params(&store, |t| {
        let xv = t.input(x.clone());
        f(t, xv)
    }));
    record(r, "network B1 input", check_params_and_input(&store, &x, |t, v| f(t, v[0])));
}

/// Every check group, in a fixed order.
pub const GROUPS: [(&str, fn(&mut Report)); 9] = [
    ("conv2d", conv2d_same_and_valid),
    ("maxpool", maxpool),
    ("batchnorm", batchnorm_train_and_infer),
    ("dense", dense),
    ("elementwise", elementwise_ops),
    ("losses", losses),
    ("op chains", random_three_op_chains),
    ("network A", tiny_network_a),
    ("network B1", tiny_network_b1),
];
