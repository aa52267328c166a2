//! Splits, the early-stopped training loop and run aggregation.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::linalg::Dense;
use crate::model::{DsfModel, DsfParams};
use crate::rng::{derive_seed, rng_for, stream};
use crate::scalar::Scalar;
use crate::tensor::{AdamConfig, AdamState, Tape};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitMode {
    /// 60% / 20% / 20%
    Dense,
    /// 2.5% / 2.5% / 95%
    Sparse,
}

impl SplitMode {
    /// Train and validation fractions; the test set takes the rest.
    pub fn fractions(self) -> (f64, f64) {
        match self {
            SplitMode::Dense => (0.6, 0.2),
            SplitMode::Sparse => (0.025, 0.025),
        }
    }
}

impl fmt::Display for SplitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitMode::Dense => "dense",
            SplitMode::Sparse => "sparse",
        })
    }
}

impl FromStr for SplitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dense" => Ok(SplitMode::Dense),
            "sparse" => Ok(SplitMode::Sparse),
            _ => Err(Error::Config(format!("unknown split mode {s:?}"))),
        }
    }
}

/// Disjoint, exhaustive train/validation/test node sets (each sorted).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    pub fn num_nodes(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    fn mask(&self, part: &[usize]) -> Vec<bool> {
        let mut m = vec![false; self.num_nodes()];
        for &i in part {
            m[i] = true;
        }
        m
    }

    pub fn train_mask(&self) -> Vec<bool> {
        self.mask(&self.train)
    }

    pub fn val_mask(&self) -> Vec<bool> {
        self.mask(&self.val)
    }

    pub fn test_mask(&self) -> Vec<bool> {
        self.mask(&self.test)
    }
}

/// `num_splits` seeded shuffles sliced by the mode's proportions
/// (counts rounded to nearest, test gets the remainder).
pub fn make_splits(num_nodes: usize, mode: SplitMode, num_splits: usize, seed: u64) -> Result<Vec<Split>> {
    let (ft, fv) = mode.fractions();
    let n_train = (ft * num_nodes as f64).round() as usize;
    let n_val = ((fv * num_nodes as f64).round() as usize).min(num_nodes - n_train);
    if n_train == 0 {
        return Err(Error::EmptySplit(num_nodes));
    }
    Ok((0..num_splits)
        .map(|s| {
            let mut order: Vec<usize> = (0..num_nodes).collect();
            order.shuffle(&mut rng_for(seed, &[stream::SPLIT, s as u64]));
            let mut train = order[..n_train].to_vec();
            let mut val = order[n_train..n_train + n_val].to_vec();
            let mut test = order[n_train + n_val..].to_vec();
            train.sort_unstable();
            val.sort_unstable();
            test.sort_unstable();
            Split { train, val, test }
        })
        .collect())
}

/// Row-wise argmax; ties go to the lowest class index.
pub fn predictions<T: Scalar>(logits: &Dense<T>) -> Vec<usize> {
    (0..logits.rows())
        .map(|i| {
            let row = logits.row(i);
            let mut best = 0;
            for (c, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

/// Fraction of `nodes` whose prediction matches the label.
pub fn accuracy(predicted: &[usize], labels: &[usize], nodes: &[usize]) -> f64 {
    if nodes.is_empty() {
        return 0.0;
    }
    let hits = nodes.iter().filter(|&&i| predicted[i] == labels[i]).count();
    hits as f64 / nodes.len() as f64
}

/// Outcome of one early-stopped training run.
#[derive(Debug, Clone)]
pub struct RunOutcome<T> {
    pub test_acc: f64,
    pub val_acc: f64,
    pub train_acc: f64,
    /// Zero-based epoch whose parameters are reported.
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub final_loss: f64,
    pub best_params: DsfParams<T>,
}

/// Full-graph Adam training on the split's train nodes, early-stopped on
/// validation accuracy. Test accuracy is read at the best validation epoch;
/// ties keep the earlier epoch.
pub fn train<T: Scalar>(
    model: &DsfModel<T>,
    labels: &[usize],
    split: &Split,
    seed: u64,
) -> Result<RunOutcome<T>> {
    let params = model.init_params(&mut rng_for(seed, &[stream::INIT]));
    train_from(model, labels, split, seed, params)
}

/// [`train`] starting from given parameters.
pub fn train_from<T: Scalar>(
    model: &DsfModel<T>,
    labels: &[usize],
    split: &Split,
    seed: u64,
    mut params: DsfParams<T>,
) -> Result<RunOutcome<T>> {
    let cfg = model.config();
    if labels.len() != model.num_nodes() || split.num_nodes() != model.num_nodes() {
        return Err(Error::RowCount(split.num_nodes(), model.num_nodes()));
    }
    if split.train.is_empty() {
        return Err(Error::EmptySplit(model.num_nodes()));
    }
    let train_mask = split.train_mask();
    let mut dropout_rng = rng_for(seed, &[stream::DROPOUT]);
    let shapes: Vec<_> = params.tensors().iter().map(|t| t.shape()).collect();
    let mut adam = AdamState::new(
        AdamConfig {
            lr: cfg.lr,
            weight_decay: cfg.weight_decay,
            ..AdamConfig::default()
        },
        &shapes,
    );

    let score = |params: &DsfParams<T>| -> Result<(f64, f64, f64)> {
        let pred = predictions(&model.evaluate(params)?.logits);
        Ok((
            accuracy(&pred, labels, &split.train),
            accuracy(&pred, labels, &split.val),
            accuracy(&pred, labels, &split.test),
        ))
    };

    let (mut best_train, mut best_val, mut best_test) = (0.0, 0.0, 0.0);
    let mut best_epoch = 0;
    let mut best_params = params.clone();
    let mut has_best = false;
    let mut final_loss = f64::NAN;
    let mut epochs_run = 0;
    for epoch in 0..cfg.epochs {
        let mut tape = Tape::new();
        let fwd = model.forward(&mut tape, &params, true, &mut dropout_rng)?;
        let loss = model.total_loss(&mut tape, &fwd, labels, &train_mask)?;
        final_loss = tape.value(loss).item().as_f64();
        if !final_loss.is_finite() {
            return Err(Error::Divergence {
                epoch,
                loss: final_loss,
            });
        }
        tape.backward(loss)?;
        let grads: Vec<Option<&Dense<T>>> = fwd.params.all.iter().map(|&v| tape.grad(v)).collect();
        adam.update(&mut params.tensors_mut(), &grads)?;
        epochs_run = epoch + 1;

        let (tr, va, te) = score(&params)?;
        if !has_best || va > best_val {
            (best_train, best_val, best_test) = (tr, va, te);
            best_epoch = epoch;
            best_params = params.clone();
            has_best = true;
        } else if epoch - best_epoch >= cfg.patience {
            break;
        }
    }
    Ok(RunOutcome {
        test_acc: best_test,
        val_acc: best_val,
        train_acc: best_train,
        best_epoch,
        epochs_run,
        final_loss,
        best_params,
    })
}

/// Sample mean with a normal-approximation 95% half-width
/// `1.96·s/√n` (zero for a single value).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub n: usize,
    pub mean: f64,
    pub ci95: f64,
}

pub fn aggregate(values: &[f64]) -> Result<Aggregate> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("nothing to aggregate".into()));
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let ci95 = if n < 2 {
        0.0
    } else {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        1.96 * var.sqrt() / (n as f64).sqrt()
    };
    Ok(Aggregate { n, mean, ci95 })
}

/// Seed of grid cell `(run, split)`.
pub fn cell_seed(base_seed: u64, run: usize, split: usize) -> u64 {
    derive_seed(base_seed, &[run as u64, split as u64])
}

/// One finished cell of a runs × splits grid.
#[derive(Debug, Clone)]
pub struct CellResult<T> {
    pub run: usize,
    pub split: usize,
    pub seed: u64,
    pub outcome: RunOutcome<T>,
}

/// Trains every `(run, split)` cell. Cells are independent model instances
/// and run on up to `threads` worker threads; results come back in
/// `(split, run)` order regardless of scheduling.
pub fn run_grid<T: Scalar>(
    graph: &Graph<T>,
    model: &DsfModel<T>,
    splits: &[Split],
    runs: usize,
    base_seed: u64,
    threads: usize,
) -> Result<Vec<CellResult<T>>> {
    let cells: Vec<(usize, usize)> = (0..splits.len())
        .flat_map(|s| (0..runs).map(move |r| (r, s)))
        .collect();
    let labels = graph.labels();
    let work = |&(run, split): &(usize, usize)| -> Result<CellResult<T>> {
        let seed = cell_seed(base_seed, run, split);
        Ok(CellResult {
            run,
            split,
            seed,
            outcome: train(model, labels, &splits[split], seed)?,
        })
    };
    let threads = threads.clamp(1, cells.len().max(1));
    if threads == 1 {
        return cells.iter().map(work).collect();
    }
    let chunk = cells.len().div_ceil(threads);
    let results: Vec<Result<Vec<CellResult<T>>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = cells
            .chunks(chunk)
            .map(|part| scope.spawn(move || part.iter().map(work).collect()))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("training thread panicked"))
            .collect()
    });
    let mut out = Vec::with_capacity(cells.len());
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}
