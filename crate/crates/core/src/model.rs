//! Diverse spectral filtering model.
//!
//! Node-specific filter weights are factored as `β_{k,i} = γ_k · θ_{k,i}`:
//! `γ_k` is a global per-order weight and `θ_{k,i}` is read off an iteratively
//! refined positional embedding of node `i`. The filtered signal is
//! `Z = Σ_k diag(β_k) P_k(L̂) H0` for the backbone's polynomial basis `P_k`.

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::graph::{Graph, GraphOperators, SparseOperator};
use crate::linalg::Dense;
use crate::poly::{apply_basis_with, homogeneous_filter, BasisKind, CoefficientSet};
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::spectra::eigendecompose;
use crate::tensor::{glorot_uniform, Checkpoint, Tape, TapeAlgebra, Var};

macro_rules! string_enum {
    ($ty:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($ty::$variant => $text),+ })
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s.to_ascii_lowercase().as_str() {
                    $($text => Ok($ty::$variant),)+
                    other => Err(Error::Config(format!(
                        "unknown {} {other:?}", stringify!($ty).to_ascii_lowercase()
                    ))),
                }
            }
        }
    };
}

/// `I` keeps the full positional update; `R` drops its quadratic term and
/// regularizes orthogonality instead.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    I,
    R,
}
string_enum!(Mode { I => "i", R => "r" });

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backbone {
    Gpr,
    Bern,
    Jacobi,
}
string_enum!(Backbone { Gpr => "gpr", Bern => "bern", Jacobi => "jacobi" });

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PositionalInit {
    LapPe,
    RwPe,
}
string_enum!(PositionalInit { LapPe => "lappe", RwPe => "rwpe" });

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Sigmoid,
    Tanh,
}
string_enum!(Activation { Sigmoid => "sigmoid", Tanh => "tanh" });

/// `Dsf` is the full model, `Baseline` forces `θ ≡ 1` (the plain backbone),
/// `NoIpe` trains the `N × (K+1)` weight matrix directly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Dsf,
    Baseline,
    NoIpe,
}
string_enum!(Variant { Dsf => "dsf", Baseline => "baseline", NoIpe => "no_ipe" });

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaInit {
    /// `γ_k = α(1−α)^k`, with `γ_K` taking the whole tail `(1−α)^K`.
    Ppr(f64),
    Uniform,
    /// Seeded, uniform in `±0.5`.
    Random,
    Constant(f64),
}

impl fmt::Display for GammaInit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GammaInit::Ppr(a) => write!(f, "ppr:{a}"),
            GammaInit::Uniform => f.write_str("uniform"),
            GammaInit::Random => f.write_str("random"),
            GammaInit::Constant(c) => write!(f, "const:{c}"),
        }
    }
}

impl FromStr for GammaInit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s.as_str(), None),
        };
        let num = |a: Option<&str>| -> Result<f64> {
            a.ok_or_else(|| Error::Config(format!("gamma_init {s:?} needs a value")))?
                .parse()
                .map_err(|_| Error::Config(format!("bad number in gamma_init {s:?}")))
        };
        match head {
            "ppr" => {
                let a = num(arg)?;
                if !(a > 0.0 && a <= 1.0) {
                    return Err(Error::Config(format!("ppr teleport {a} not in (0, 1]")));
                }
                Ok(GammaInit::Ppr(a))
            }
            "uniform" => Ok(GammaInit::Uniform),
            "random" => Ok(GammaInit::Random),
            "const" => Ok(GammaInit::Constant(num(arg)?)),
            _ => Err(Error::Config(format!("unknown gamma_init {s:?}"))),
        }
    }
}

/// Hyperparameters. Field names double as config-file keys.
#[derive(Debug, Clone, PartialEq)]
pub struct DsfConfig {
    /// Polynomial order `K`.
    pub order: usize,
    pub hidden: usize,
    /// Raw positional width `f_p`.
    pub pe_dim: usize,
    pub eta1: f64,
    pub eta2: f64,
    pub lambda_orth: f64,
    pub mode: Mode,
    pub backbone: Backbone,
    pub pe_init: PositionalInit,
    /// Drop the trivial first Laplacian eigenvector from LapPE.
    pub lap_skip_first: bool,
    pub dropout: f64,
    /// `None` picks the backbone default.
    pub sigma_p: Option<Activation>,
    /// `None` picks the backbone default.
    pub gamma_init: Option<GammaInit>,
    pub jacobi_a: f64,
    pub jacobi_b: f64,
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub patience: usize,
    pub variant: Variant,
    pub freeze_gamma: bool,
}

impl Default for DsfConfig {
    fn default() -> Self {
        DsfConfig {
            order: 10,
            hidden: 64,
            pe_dim: 16,
            eta1: 0.5,
            eta2: 0.0,
            lambda_orth: 0.01,
            mode: Mode::R,
            backbone: Backbone::Gpr,
            pe_init: PositionalInit::LapPe,
            lap_skip_first: false,
            dropout: 0.5,
            sigma_p: None,
            gamma_init: None,
            jacobi_a: 1.0,
            jacobi_b: 1.0,
            lr: 0.01,
            weight_decay: 5e-4,
            epochs: 1000,
            patience: 100,
            variant: Variant::Dsf,
            freeze_gamma: false,
        }
    }
}

fn parse_value<V: FromStr>(key: &str, value: &str) -> Result<V> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("bad value {value:?} for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("bad boolean {value:?} for {key}"))),
    }
}

fn parse_auto<V: FromStr<Err = Error>>(value: &str) -> Result<Option<V>> {
    if value.trim().eq_ignore_ascii_case("auto") {
        Ok(None)
    } else {
        value.trim().parse().map(Some)
    }
}

impl DsfConfig {
    pub const KEYS: &'static [&'static str] = &[
        "order",
        "hidden",
        "pe_dim",
        "eta1",
        "eta2",
        "lambda_orth",
        "mode",
        "backbone",
        "pe_init",
        "lap_skip_first",
        "dropout",
        "sigma_p",
        "gamma_init",
        "jacobi_a",
        "jacobi_b",
        "lr",
        "weight_decay",
        "epochs",
        "patience",
        "variant",
        "freeze_gamma",
    ];

    /// Sets one key from its textual value. Unknown keys are errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "order" => self.order = parse_value(key, value)?,
            "hidden" => self.hidden = parse_value(key, value)?,
            "pe_dim" => self.pe_dim = parse_value(key, value)?,
            "eta1" => self.eta1 = parse_value(key, value)?,
            "eta2" => self.eta2 = parse_value(key, value)?,
            "lambda_orth" => self.lambda_orth = parse_value(key, value)?,
            "mode" => self.mode = value.trim().parse()?,
            "backbone" => self.backbone = value.trim().parse()?,
            "pe_init" => self.pe_init = value.trim().parse()?,
            "lap_skip_first" => self.lap_skip_first = parse_bool(key, value)?,
            "dropout" => self.dropout = parse_value(key, value)?,
            "sigma_p" => self.sigma_p = parse_auto(value)?,
            "gamma_init" => self.gamma_init = parse_auto(value)?,
            "jacobi_a" => self.jacobi_a = parse_value(key, value)?,
            "jacobi_b" => self.jacobi_b = parse_value(key, value)?,
            "lr" => self.lr = parse_value(key, value)?,
            "weight_decay" => self.weight_decay = parse_value(key, value)?,
            "epochs" => self.epochs = parse_value(key, value)?,
            "patience" => self.patience = parse_value(key, value)?,
            "variant" => self.variant = value.trim().parse()?,
            "freeze_gamma" => self.freeze_gamma = parse_bool(key, value)?,
            _ => return Err(Error::Config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Every key with its current value, in [`Self::KEYS`] order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let auto = |v: Option<String>| v.unwrap_or_else(|| "auto".into());
        let values = [
            self.order.to_string(),
            self.hidden.to_string(),
            self.pe_dim.to_string(),
            self.eta1.to_string(),
            self.eta2.to_string(),
            self.lambda_orth.to_string(),
            self.mode.to_string(),
            self.backbone.to_string(),
            self.pe_init.to_string(),
            self.lap_skip_first.to_string(),
            self.dropout.to_string(),
            auto(self.sigma_p.map(|a| a.to_string())),
            auto(self.gamma_init.map(|g| g.to_string())),
            self.jacobi_a.to_string(),
            self.jacobi_b.to_string(),
            self.lr.to_string(),
            self.weight_decay.to_string(),
            self.epochs.to_string(),
            self.patience.to_string(),
            self.variant.to_string(),
            self.freeze_gamma.to_string(),
        ];
        Self::KEYS.iter().copied().zip(values).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} = {v} not in [0, 1]")))
            }
        };
        unit("eta1", self.eta1)?;
        unit("eta2", self.eta2)?;
        if self.mode == Mode::R && self.eta2 != 0.0 {
            return Err(Error::Config(format!(
                "mode r requires eta2 = 0, got {}",
                self.eta2
            )));
        }
        if self.backbone == Backbone::Bern && self.sigma_p == Some(Activation::Tanh) {
            return Err(Error::Config(
                "bern backbone needs non-negative weights; sigma_p must be sigmoid".into(),
            ));
        }
        if !(self.lambda_orth >= 0.0 && self.lambda_orth.is_finite()) {
            return Err(Error::Config(format!("lambda_orth = {} must be >= 0", self.lambda_orth)));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout = {} not in [0, 1)", self.dropout)));
        }
        if self.hidden == 0 || self.pe_dim == 0 {
            return Err(Error::Config("hidden and pe_dim must be positive".into()));
        }
        if !(self.jacobi_a > -1.0 && self.jacobi_b > -1.0) {
            return Err(Error::Config("jacobi_a and jacobi_b must exceed -1".into()));
        }
        if !(self.lr > 0.0 && self.weight_decay >= 0.0) {
            return Err(Error::Config("lr must be positive and weight_decay >= 0".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be positive".into()));
        }
        Ok(())
    }

    pub fn activation(&self) -> Activation {
        self.sigma_p.unwrap_or(match self.backbone {
            Backbone::Bern => Activation::Sigmoid,
            Backbone::Gpr | Backbone::Jacobi => Activation::Tanh,
        })
    }

    pub fn gamma_strategy(&self) -> GammaInit {
        self.gamma_init.unwrap_or(match self.backbone {
            Backbone::Gpr => GammaInit::Ppr(0.1),
            Backbone::Bern => GammaInit::Constant(0.5),
            Backbone::Jacobi => GammaInit::Constant(1.0),
        })
    }

    pub fn basis<T: Scalar>(&self) -> BasisKind<T> {
        match self.backbone {
            Backbone::Gpr => BasisKind::Monomial,
            Backbone::Bern => BasisKind::Bernstein,
            Backbone::Jacobi => BasisKind::Jacobi {
                a: T::of(self.jacobi_a),
                b: T::of(self.jacobi_b),
            },
        }
    }
}

/// Initial global weights for a strategy.
pub fn initial_gammas<T: Scalar>(strategy: GammaInit, order: usize, rng: &mut Rng) -> Vec<T> {
    match strategy {
        GammaInit::Ppr(alpha) => (0..=order)
            .map(|k| {
                if k == order {
                    (1.0 - alpha).powi(k as i32)
                } else {
                    alpha * (1.0 - alpha).powi(k as i32)
                }
            })
            .map(T::of)
            .collect(),
        GammaInit::Uniform => vec![T::of(1.0 / (order + 1) as f64); order + 1],
        GammaInit::Random => (0..=order).map(|_| T::of(rng.gen_range(-0.5..=0.5))).collect(),
        GammaInit::Constant(c) => vec![T::of(c); order + 1],
    }
}

/// Every trainable tensor of the model.
#[derive(Debug, Clone, PartialEq)]
pub struct DsfParams<T> {
    /// `f × d`
    pub w_x: Dense<T>,
    /// `1 × d`
    pub b_x: Dense<T>,
    /// `f_p × d`
    pub w_p: Dense<T>,
    /// `1 × d`
    pub b_p: Dense<T>,
    /// `d × d`, only read in mode I with `η2 > 0`.
    pub w: Dense<T>,
    /// `d × C`
    pub w_f: Dense<T>,
    /// `1 × C`
    pub b_f: Dense<T>,
    /// `W^(k)`, `d × 1` each, `k = 0..=K`.
    pub w_order: Vec<Dense<T>>,
    /// `b^(k)`, `1 × 1` each.
    pub b_order: Vec<Dense<T>>,
    /// `γ_k`, `1 × 1` each.
    pub gamma: Vec<Dense<T>>,
    /// Directly trained `β_{k,·}` columns (`N × 1`) of the no-IPE variant;
    /// empty otherwise.
    pub beta_free: Vec<Dense<T>>,
}

impl<T: Scalar> DsfParams<T> {
    pub fn init(
        config: &DsfConfig,
        num_features: usize,
        num_classes: usize,
        num_nodes: usize,
        rng: &mut Rng,
    ) -> Self {
        let (d, k) = (config.hidden, config.order);
        let w_x = glorot_uniform(num_features, d, rng);
        let w_p = glorot_uniform(config.pe_dim, d, rng);
        let w = glorot_uniform(d, d, rng);
        let w_f = glorot_uniform(d, num_classes, rng);
        let w_order = (0..=k).map(|_| glorot_uniform(d, 1, rng)).collect();
        let gamma_init: Vec<T> = initial_gammas(config.gamma_strategy(), k, rng);
        // Every node starts from the shared filter.
        let beta_free = if config.variant == Variant::NoIpe {
            gamma_init.iter().map(|&g| Dense::filled(num_nodes, 1, g)).collect()
        } else {
            Vec::new()
        };
        let gamma = gamma_init.into_iter().map(Dense::scalar).collect();
        DsfParams {
            w_x,
            b_x: Dense::zeros(1, d),
            w_p,
            b_p: Dense::zeros(1, d),
            w,
            w_f,
            b_f: Dense::zeros(1, num_classes),
            w_order,
            b_order: (0..=k).map(|_| Dense::zeros(1, 1)).collect(),
            gamma,
            beta_free,
        }
    }

    pub fn order(&self) -> usize {
        self.gamma.len().saturating_sub(1)
    }

    /// Names in the canonical order shared with [`Self::tensors`].
    pub fn names(&self) -> Vec<String> {
        let mut names: Vec<String> = ["w_x", "b_x", "w_p", "b_p", "w", "w_f", "b_f"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        for (prefix, len) in [
            ("w_order", self.w_order.len()),
            ("b_order", self.b_order.len()),
            ("gamma", self.gamma.len()),
            ("beta_free", self.beta_free.len()),
        ] {
            names.extend((0..len).map(|k| format!("{prefix}_{k}")));
        }
        names
    }

    pub fn tensors(&self) -> Vec<&Dense<T>> {
        let mut out = vec![&self.w_x, &self.b_x, &self.w_p, &self.b_p, &self.w, &self.w_f, &self.b_f];
        out.extend(&self.w_order);
        out.extend(&self.b_order);
        out.extend(&self.gamma);
        out.extend(&self.beta_free);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Dense<T>> {
        let mut out = vec![
            &mut self.w_x,
            &mut self.b_x,
            &mut self.w_p,
            &mut self.b_p,
            &mut self.w,
            &mut self.w_f,
            &mut self.b_f,
        ];
        out.extend(&mut self.w_order);
        out.extend(&mut self.b_order);
        out.extend(&mut self.gamma);
        out.extend(&mut self.beta_free);
        out
    }

    pub fn is_gamma(name: &str) -> bool {
        name.starts_with("gamma_")
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint::from_tensors(self.names().into_iter().zip(self.tensors()))
    }

    /// Restores parameters shaped like `template` from a checkpoint.
    pub fn from_checkpoint(template: &Self, checkpoint: &Checkpoint) -> Result<Self> {
        let mut out = template.clone();
        let names = out.names();
        for (name, slot) in names.iter().zip(out.tensors_mut()) {
            let value = checkpoint.get(name)?;
            if value.shape() != slot.shape() {
                return Err(Error::ShapeMismatch {
                    op: "checkpoint",
                    left: slot.shape(),
                    right: value.shape(),
                });
            }
            *slot = value;
        }
        Ok(out)
    }
}

/// Raw positional features `X_p` (`N × f_p`).
///
/// LapPE takes entries of the lowest-frequency eigenvectors of `L̂` under the
/// deterministic sign convention; RWPE takes `(RW^m)_{ii}` for `m = 1..=f_p`
/// with `RW = A D^{-1}`.
pub fn init_positional<T: Scalar>(
    graph: &Graph<T>,
    init: PositionalInit,
    pe_dim: usize,
    skip_first: bool,
) -> Result<Dense<T>> {
    let n = graph.num_nodes();
    match init {
        PositionalInit::LapPe => {
            let offset = usize::from(skip_first);
            if pe_dim + offset > n {
                return Err(Error::InvalidArgument(format!(
                    "positional width {pe_dim} (+{offset} skipped) exceeds {n} nodes"
                )));
            }
            let dec = eigendecompose(&graph.normalized_operators().laplacian)?;
            let mut out = Dense::zeros(n, pe_dim);
            for c in 0..pe_dim {
                out.set_column(c, &dec.vector(c + offset));
            }
            Ok(out)
        }
        PositionalInit::RwPe => {
            if pe_dim > n {
                return Err(Error::InvalidArgument(format!(
                    "positional width {pe_dim} exceeds {n} nodes"
                )));
            }
            let rw = graph.random_walk_operator();
            let mut power = Dense::identity(n);
            let mut out = Dense::zeros(n, pe_dim);
            for m in 0..pe_dim {
                power = rw.matmul(&power)?;
                for i in 0..n {
                    out[(i, m)] = power[(i, i)];
                }
            }
            Ok(out)
        }
    }
}

/// One positional update:
/// `tanh(η1·X_proj + (1−η1)·((1+η2)Â − η2·σ(P W Pᵀ))·P)`.
///
/// The quadratic term is only built when `η2 ≠ 0`, and nothing graph-related
/// is recorded when `η1 = 1`.
pub fn ipe_step<'g, T: Scalar>(
    tape: &mut Tape<'g, T>,
    p: Var,
    x_proj: Var,
    adjacency: &'g SparseOperator<T>,
    w: Option<Var>,
    eta1: T,
    eta2: T,
) -> Result<Var> {
    if eta1 == T::one() {
        return Ok(tape.tanh(x_proj));
    }
    let ap = tape.sparse_dense_matmul(adjacency, p)?;
    let inner = if eta2 == T::zero() {
        ap
    } else {
        let w = w.ok_or_else(|| Error::InvalidArgument("eta2 > 0 needs the W parameter".into()))?;
        let pw = tape.matmul(p, w)?;
        let pt = tape.transpose(p);
        let scores = tape.matmul(pw, pt)?;
        let gate = tape.sigmoid(scores);
        let gp = tape.matmul(gate, p)?;
        tape.combine(T::one() + eta2, ap, -eta2, gp)?
    };
    let pre = tape.combine(eta1, x_proj, T::one() - eta1, inner)?;
    Ok(tape.tanh(pre))
}

fn activate<T: Scalar>(tape: &mut Tape<'_, T>, x: Var, act: Activation) -> Var {
    match act {
        Activation::Sigmoid => tape.sigmoid(x),
        Activation::Tanh => tape.tanh(x),
    }
}

/// `θ_{k,i} = σ_p(W^(k)ᵀ P_i + b^(k))` as an `N × 1` column.
pub fn node_theta<T: Scalar>(
    tape: &mut Tape<'_, T>,
    p: Var,
    w_k: Var,
    b_k: Var,
    act: Activation,
) -> Result<Var> {
    let z = tape.matmul(p, w_k)?;
    let z = tape.add_row_broadcast(z, b_k)?;
    Ok(activate(tape, z, act))
}

/// Combines global and local weights into `β_{k,·}` for every order.
///
/// GPR: `γ_k θ_k`. Bern: `ReLU(γ_k) θ_k`. Jacobi: `γ_k Π_{s=1..k} θ_s`
/// (so `θ_0` is unused and `β_0 = γ_0`).
pub fn lgwd_betas<T: Scalar>(
    tape: &mut Tape<'_, T>,
    backbone: Backbone,
    gammas: &[Var],
    thetas: &[Var],
    num_nodes: usize,
) -> Result<Vec<Var>> {
    if gammas.len() != thetas.len() {
        return Err(Error::InvalidArgument(format!(
            "{} global weights for {} local weight columns",
            gammas.len(),
            thetas.len()
        )));
    }
    let mut betas = Vec::with_capacity(gammas.len());
    match backbone {
        Backbone::Gpr => {
            for (&g, &t) in gammas.iter().zip(thetas) {
                betas.push(tape.mul_by_scalar_var(g, t)?);
            }
        }
        Backbone::Bern => {
            for (&g, &t) in gammas.iter().zip(thetas) {
                let g = tape.relu(g);
                betas.push(tape.mul_by_scalar_var(g, t)?);
            }
        }
        Backbone::Jacobi => {
            let mut running = tape.constant(Dense::filled(num_nodes, 1, T::one()));
            for (k, (&g, &t)) in gammas.iter().zip(thetas).enumerate() {
                if k > 0 {
                    running = tape.hadamard(running, t)?;
                }
                betas.push(tape.mul_by_scalar_var(g, running)?);
            }
        }
    }
    Ok(betas)
}

/// `‖P̂ᵀP̂ − I‖²_F` with `P̂` the column-normalized positions.
pub fn orth_regularizer<T: Scalar>(tape: &mut Tape<'_, T>, p: Var) -> Result<Var> {
    let d = tape.shape(p).1;
    let p_hat = tape.column_normalize(p)?;
    let pt = tape.transpose(p_hat);
    let gram = tape.matmul(pt, p_hat)?;
    let eye = tape.constant(Dense::identity(d));
    let diff = tape.sub(gram, eye)?;
    Ok(tape.frobenius_sq(diff))
}

/// Parameters placed on a tape, in [`DsfParams::tensors`] order.
#[derive(Debug, Clone)]
pub struct PlacedParams {
    pub all: Vec<Var>,
}

impl PlacedParams {
    fn new<T: Scalar>(tape: &mut Tape<'_, T>, params: &DsfParams<T>, frozen_gamma: bool) -> Self {
        let names = params.names();
        let all = names
            .iter()
            .zip(params.tensors())
            .map(|(name, t)| {
                if frozen_gamma && DsfParams::<T>::is_gamma(name) {
                    tape.constant(t.clone())
                } else {
                    tape.param(t.clone())
                }
            })
            .collect();
        PlacedParams { all }
    }
}

/// Handles produced by one forward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    /// Pre-softmax scores, `N × C`.
    pub logits: Var,
    /// `P^(K)`; absent when positional encoding is off.
    pub positions: Option<Var>,
    /// `β_{k,·}` columns, `k = 0..=K`.
    pub betas: Vec<Var>,
    pub params: PlacedParams,
}

/// Values of one forward pass copied off the tape.
#[derive(Debug, Clone)]
pub struct Evaluation<T> {
    pub logits: Dense<T>,
    pub positions: Option<Dense<T>>,
    /// `N × (K+1)`, entry `(i, k)` is `β_{k,i}`.
    pub betas: Dense<T>,
}

/// A model bound to one graph: operators and positional inputs are computed
/// once and reused by every forward pass.
#[derive(Debug, Clone)]
pub struct DsfModel<T> {
    config: DsfConfig,
    kind: BasisKind<T>,
    ops: GraphOperators<T>,
    features: Dense<T>,
    positional: Option<Dense<T>>,
    num_classes: usize,
}

impl<T: Scalar> DsfModel<T> {
    pub fn new(graph: &Graph<T>, config: DsfConfig) -> Result<Self> {
        config.validate()?;
        let positional = match config.variant {
            Variant::Dsf => Some(init_positional(
                graph,
                config.pe_init,
                config.pe_dim,
                config.lap_skip_first,
            )?),
            Variant::Baseline | Variant::NoIpe => None,
        };
        Ok(DsfModel {
            kind: config.basis(),
            ops: graph.normalized_operators(),
            features: graph.features().clone(),
            positional,
            num_classes: graph.class_count(),
            config,
        })
    }

    pub fn config(&self) -> &DsfConfig {
        &self.config
    }

    pub fn basis(&self) -> &BasisKind<T> {
        &self.kind
    }

    pub fn operators(&self) -> &GraphOperators<T> {
        &self.ops
    }

    pub fn num_nodes(&self) -> usize {
        self.features.rows()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn positional_inputs(&self) -> Option<&Dense<T>> {
        self.positional.as_ref()
    }

    pub fn init_params(&self, rng: &mut Rng) -> DsfParams<T> {
        DsfParams::init(
            &self.config,
            self.features.cols(),
            self.num_classes,
            self.num_nodes(),
            rng,
        )
    }

    /// Records the forward pass on `tape`. Dropout is active only when `train` is set.
    pub fn forward<'m>(
        &'m self,
        tape: &mut Tape<'m, T>,
        params: &DsfParams<T>,
        train: bool,
        rng: &mut Rng,
    ) -> Result<Forward> {
        let cfg = &self.config;
        let k_max = cfg.order;
        if params.order() != k_max || params.w_order.len() != k_max + 1 || params.b_order.len() != k_max + 1 {
            return Err(Error::InvalidArgument(format!(
                "parameters are for order {}, config says {k_max}",
                params.order()
            )));
        }
        let n = self.num_nodes();
        let placed = PlacedParams::new(tape, params, cfg.freeze_gamma);
        let [w_x, b_x, w_p, b_p, w, w_f, b_f] = std::array::from_fn(|i| placed.all[i]);
        let w_order = &placed.all[7..8 + k_max];
        let b_order = &placed.all[8 + k_max..9 + 2 * k_max];
        let gammas = &placed.all[9 + 2 * k_max..10 + 3 * k_max];
        let beta_free = &placed.all[10 + 3 * k_max..];
        let p_drop = T::of(cfg.dropout);

        let x = tape.constant(self.features.clone());
        let h = tape.matmul(x, w_x)?;
        let h = tape.add_row_broadcast(h, b_x)?;
        let h = tape.relu(h);
        let h0 = tape.dropout(h, p_drop, train, rng)?;

        let act = cfg.activation();
        let mut positions = None;
        let betas = match cfg.variant {
            Variant::Baseline => {
                let ones = tape.constant(Dense::filled(n, 1, T::one()));
                lgwd_betas(tape, cfg.backbone, gammas, &vec![ones; k_max + 1], n)?
            }
            Variant::NoIpe => {
                if beta_free.len() != k_max + 1 {
                    return Err(Error::InvalidArgument(
                        "no_ipe variant needs free per-node weights".into(),
                    ));
                }
                match cfg.backbone {
                    Backbone::Bern => beta_free.iter().map(|&b| tape.relu(b)).collect(),
                    Backbone::Gpr | Backbone::Jacobi => beta_free.to_vec(),
                }
            }
            Variant::Dsf => {
                let xp = self
                    .positional
                    .as_ref()
                    .expect("positional inputs exist for the dsf variant");
                let xp = tape.constant(xp.clone());
                let p = tape.matmul(xp, w_p)?;
                let p = tape.add_row_broadcast(p, b_p)?;
                let p = tape.tanh(p);
                let x_proj = tape.dropout(p, p_drop, train, rng)?;
                let (eta1, eta2) = (T::of(cfg.eta1), T::of(cfg.eta2));
                let w_gate = (cfg.mode == Mode::I && cfg.eta2 != 0.0).then_some(w);
                let mut p = x_proj;
                let mut thetas = Vec::with_capacity(k_max + 1);
                thetas.push(node_theta(tape, p, w_order[0], b_order[0], act)?);
                for k in 1..=k_max {
                    p = ipe_step(tape, p, x_proj, &self.ops.adjacency, w_gate, eta1, eta2)?;
                    thetas.push(node_theta(tape, p, w_order[k], b_order[k], act)?);
                }
                positions = Some(p);
                lgwd_betas(tape, cfg.backbone, gammas, &thetas, n)?
            }
        };

        let terms = apply_basis_with(&mut TapeAlgebra { tape, ops: &self.ops }, &self.kind, k_max, &h0)?;
        let mut z = tape.row_scale(betas[0], terms[0])?;
        for k in 1..=k_max {
            let zk = tape.row_scale(betas[k], terms[k])?;
            z = tape.add(z, zk)?;
        }
        let logits = tape.matmul(z, w_f)?;
        let logits = tape.add_row_broadcast(logits, b_f)?;
        Ok(Forward {
            logits,
            positions,
            betas,
            params: placed,
        })
    }

    /// Masked cross-entropy, plus `λ·L_orth` in mode R when positions exist.
    pub fn total_loss(
        &self,
        tape: &mut Tape<'_, T>,
        forward: &Forward,
        targets: &[usize],
        mask: &[bool],
    ) -> Result<Var> {
        let task = tape.softmax_cross_entropy(forward.logits, targets, mask)?;
        match (self.config.mode, forward.positions) {
            (Mode::R, Some(p)) if self.config.lambda_orth > 0.0 => {
                let orth = orth_regularizer(tape, p)?;
                tape.combine(T::one(), task, T::of(self.config.lambda_orth), orth)
            }
            _ => Ok(task),
        }
    }

    /// Deterministic (dropout-free) forward pass.
    pub fn evaluate(&self, params: &DsfParams<T>) -> Result<Evaluation<T>> {
        let mut tape = Tape::new();
        let mut unused = crate::rng::rng_for(0, &[]);
        let fwd = self.forward(&mut tape, params, false, &mut unused)?;
        let n = self.num_nodes();
        let mut betas = Dense::zeros(n, fwd.betas.len());
        for (k, &b) in fwd.betas.iter().enumerate() {
            betas.set_column(k, tape.value(b).as_slice());
        }
        Ok(Evaluation {
            logits: tape.value(fwd.logits).clone(),
            positions: fwd.positions.map(|p| tape.value(p).clone()),
            betas,
        })
    }

    /// The plain backbone, computed without the tape: shared coefficients
    /// `γ` (rectified for Bern) applied by [`homogeneous_filter`].
    pub fn homogeneous_reference(&self, params: &DsfParams<T>) -> Result<Dense<T>> {
        let h = self.features.matmul(&params.w_x)?;
        let h = broadcast_add(&h, &params.b_x)?.map(|v| v.max(T::zero()));
        let alpha: Vec<T> = params
            .gamma
            .iter()
            .map(|g| match self.config.backbone {
                Backbone::Bern => g.item().max(T::zero()),
                Backbone::Gpr | Backbone::Jacobi => g.item(),
            })
            .collect();
        let z = homogeneous_filter(&CoefficientSet::Shared(alpha), &self.kind, &self.ops, &h)?;
        broadcast_add(&z.matmul(&params.w_f)?, &params.b_f)
    }
}

fn broadcast_add<T: Scalar>(m: &Dense<T>, row: &Dense<T>) -> Result<Dense<T>> {
    if row.rows() != 1 || row.cols() != m.cols() {
        return Err(Error::ShapeMismatch {
            op: "broadcast_add",
            left: m.shape(),
            right: row.shape(),
        });
    }
    let mut out = m.clone();
    for i in 0..m.rows() {
        for (v, &b) in out.row_mut(i).iter_mut().zip(row.row(0)) {
            *v += b;
        }
    }
    Ok(out)
}
