//! Recurrent layers and small building blocks on top of the tape.
//!
//! Parameters live off-tape as [`Tensor`]s (so they persist across passes)
//! and are registered onto a fresh tape per forward pass; the `*Vars` structs
//! hold the resulting [`Var`] handles. All vectors are columns (`[n, 1]`).

use rand::Rng;

use crate::tensor::{ShapeError, Tape, Tensor, Var};

/// Weight range for fresh recurrent/projection parameters.
pub const WEIGHT_INIT_RANGE: f64 = 0.08;
/// Forget-gate biases start at 1.0 so early training does not flush memory.
pub const FORGET_BIAS_INIT: f64 = 1.0;

/// Uniform-random tensor in `[-range, range]`.
pub fn uniform(shape: Vec<usize>, range: f64, rng: &mut impl Rng) -> Tensor {
    let n = shape.iter().product();
    let values = (0..n).map(|_| rng.gen_range(-range..=range)).collect();
    Tensor { shape, values, grad: None }
}

// ── Small blocks ────────────────────────────────────────────────────────────

/// Embedding lookup: row `id` of `table` as a column vector.
pub fn embed(tape: &mut Tape, table: Var, id: usize) -> Result<Var, ShapeError> {
    tape.row(table, id)
}

/// Affine map `W·x + b`.
pub fn linear(tape: &mut Tape, w: Var, b: Var, x: Var) -> Result<Var, ShapeError> {
    let wx = tape.matmul(w, x)?;
    tape.add(wx, b)
}

// ── LSTM stack ──────────────────────────────────────────────────────────────

/// One gate: weight over `[x; h]` plus bias.
#[derive(Debug, Clone, PartialEq)]
pub struct GateParams {
    pub w: Tensor, // hidden × (in + hidden)
    pub b: Tensor, // hidden × 1
}

impl GateParams {
    fn init(in_dim: usize, hidden: usize, bias: f64, rng: &mut impl Rng) -> Self {
        GateParams {
            w: uniform(vec![hidden, in_dim + hidden], WEIGHT_INIT_RANGE, rng),
            b: Tensor::filled(vec![hidden, 1], bias),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayerParams {
    pub input: GateParams,
    pub forget: GateParams,
    pub cell: GateParams,
    pub output: GateParams,
}

impl LstmLayerParams {
    pub fn gates(&self) -> [(&'static str, &GateParams); 4] {
        [
            ("input", &self.input),
            ("forget", &self.forget),
            ("cell", &self.cell),
            ("output", &self.output),
        ]
    }

    pub fn gates_mut(&mut self) -> [(&'static str, &mut GateParams); 4] {
        [
            ("input", &mut self.input),
            ("forget", &mut self.forget),
            ("cell", &mut self.cell),
            ("output", &mut self.output),
        ]
    }
}

/// A stack of LSTM layers applied one time step at a time.
///
/// Layer 0 consumes `input_dim`-wide vectors; higher layers consume the
/// hidden state of the layer below.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmStackParams {
    pub layers: Vec<LstmLayerParams>,
    pub input_dim: usize,
    pub hidden_dim: usize,
}

impl LstmStackParams {
    pub fn init(num_layers: usize, input_dim: usize, hidden_dim: usize, rng: &mut impl Rng) -> Self {
        let layers = (0..num_layers)
            .map(|l| {
                let in_dim = if l == 0 { input_dim } else { hidden_dim };
                LstmLayerParams {
                    input: GateParams::init(in_dim, hidden_dim, 0.0, rng),
                    forget: GateParams::init(in_dim, hidden_dim, FORGET_BIAS_INIT, rng),
                    cell: GateParams::init(in_dim, hidden_dim, 0.0, rng),
                    output: GateParams::init(in_dim, hidden_dim, 0.0, rng),
                }
            })
            .collect();
        LstmStackParams { layers, input_dim, hidden_dim }
    }

    pub fn register(&self, tape: &mut Tape) -> LstmStackVars {
        let layers = self
            .layers
            .iter()
            .map(|layer| LstmLayerVars {
                gates: layer.gates().map(|(_, g)| (tape.leaf(&g.w), tape.leaf(&g.b))),
            })
            .collect();
        LstmStackVars { layers, input_dim: self.input_dim, hidden_dim: self.hidden_dim }
    }
}

/// On-tape handles for a registered LSTM stack.
pub struct LstmStackVars {
    /// Per layer: `(w, b)` for input, forget, cell, output gates in order.
    pub layers: Vec<LstmLayerVars>,
    pub input_dim: usize,
    pub hidden_dim: usize,
}

pub struct LstmLayerVars {
    pub gates: [(Var, Var); 4],
}

/// Per-layer `(h, c)` pairs for one time step.
#[derive(Clone)]
pub struct LstmState {
    pub layers: Vec<(Var, Var)>,
}

impl LstmState {
    pub fn zeros(tape: &mut Tape, num_layers: usize, hidden_dim: usize) -> Self {
        let layers = (0..num_layers)
            .map(|_| {
                let h = tape.leaf(&Tensor::zeros(vec![hidden_dim, 1]));
                let c = tape.leaf(&Tensor::zeros(vec![hidden_dim, 1]));
                (h, c)
            })
            .collect();
        LstmState { layers }
    }

    /// Hidden state of the top layer — the stack's externally visible output.
    pub fn top_h(&self) -> Var {
        self.layers.last().expect("empty LSTM state").0
    }
}

/// One step of the stack: standard gate equations per layer,
///
/// ```text
/// z = [x; h_prev]
/// i = σ(Wi z + bi)   f = σ(Wf z + bf)
/// g = tanh(Wg z + bg) o = σ(Wo z + bo)
/// c = f ⊙ c_prev + i ⊙ g
/// h = o ⊙ tanh(c)
/// ```
pub fn lstm_step(
    tape: &mut Tape,
    p: &LstmStackVars,
    prev: &LstmState,
    input: Var,
) -> Result<LstmState, ShapeError> {
    let mut layers = Vec::with_capacity(p.layers.len());
    let mut x = input;
    for (layer, &(h_prev, c_prev)) in p.layers.iter().zip(&prev.layers) {
        let z = tape.concat(&[x, h_prev], 0)?;
        let [(wi, bi), (wf, bf), (wg, bg), (wo, bo)] = layer.gates;
        let i_lin = linear(tape, wi, bi, z)?;
        let i = tape.sigmoid(i_lin);
        let f_lin = linear(tape, wf, bf, z)?;
        let f = tape.sigmoid(f_lin);
        let g_lin = linear(tape, wg, bg, z)?;
        let g = tape.tanh(g_lin);
        let o_lin = linear(tape, wo, bo, z)?;
        let o = tape.sigmoid(o_lin);
        let fc = tape.mul(f, c_prev)?;
        let ig = tape.mul(i, g)?;
        let c = tape.add(fc, ig)?;
        let tc = tape.tanh(c);
        let h = tape.mul(o, tc)?;
        layers.push((h, c));
        x = h;
    }
    Ok(LstmState { layers })
}

/// One step with an extra context vector: identical to [`lstm_step`] on the
/// concatenation `[input; context]`.
pub fn lstm_step_ctx(
    tape: &mut Tape,
    p: &LstmStackVars,
    prev: &LstmState,
    input: Var,
    context: Var,
) -> Result<LstmState, ShapeError> {
    let joined = tape.concat(&[input, context], 0)?;
    lstm_step(tape, p, prev, joined)
}

// ── GRU / BiGRU ─────────────────────────────────────────────────────────────

/// Single-layer GRU parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GruParams {
    pub reset: GateParams,
    pub update: GateParams,
    pub cand: GateParams,
    pub input_dim: usize,
    pub hidden_dim: usize,
}

impl GruParams {
    pub fn init(input_dim: usize, hidden_dim: usize, rng: &mut impl Rng) -> Self {
        GruParams {
            reset: GateParams::init(input_dim, hidden_dim, 0.0, rng),
            update: GateParams::init(input_dim, hidden_dim, 0.0, rng),
            cand: GateParams::init(input_dim, hidden_dim, 0.0, rng),
            input_dim,
            hidden_dim,
        }
    }

    pub fn gates(&self) -> [(&'static str, &GateParams); 3] {
        [("reset", &self.reset), ("update", &self.update), ("cand", &self.cand)]
    }

    pub fn gates_mut(&mut self) -> [(&'static str, &mut GateParams); 3] {
        [("reset", &mut self.reset), ("update", &mut self.update), ("cand", &mut self.cand)]
    }

    pub fn register(&self, tape: &mut Tape) -> GruVars {
        GruVars {
            gates: self.gates().map(|(_, g)| (tape.leaf(&g.w), tape.leaf(&g.b))),
            hidden_dim: self.hidden_dim,
        }
    }
}

pub struct GruVars {
    /// `(w, b)` for reset, update, candidate in order.
    pub gates: [(Var, Var); 3],
    pub hidden_dim: usize,
}

/// Forward + backward GRUs of a bidirectional encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct BiGruParams {
    pub fwd: GruParams,
    pub bwd: GruParams,
}

impl BiGruParams {
    pub fn init(input_dim: usize, hidden_dim: usize, rng: &mut impl Rng) -> Self {
        BiGruParams {
            fwd: GruParams::init(input_dim, hidden_dim, rng),
            bwd: GruParams::init(input_dim, hidden_dim, rng),
        }
    }

    pub fn register(&self, tape: &mut Tape) -> BiGruVars {
        BiGruVars { fwd: self.fwd.register(tape), bwd: self.bwd.register(tape) }
    }
}

pub struct BiGruVars {
    pub fwd: GruVars,
    pub bwd: GruVars,
}

/// One GRU step:
///
/// ```text
/// r = σ(Wr [x; h] + br)
/// u = σ(Wu [x; h] + bu)
/// n = tanh(Wn [x; r ⊙ h] + bn)
/// h' = (1 − u) ⊙ n + u ⊙ h
/// ```
pub fn gru_step(tape: &mut Tape, p: &GruVars, h_prev: Var, x: Var) -> Result<Var, ShapeError> {
    let [(wr, br), (wu, bu), (wn, bn)] = p.gates;
    let z = tape.concat(&[x, h_prev], 0)?;
    let r_lin = linear(tape, wr, br, z)?;
    let r = tape.sigmoid(r_lin);
    let u_lin = linear(tape, wu, bu, z)?;
    let u = tape.sigmoid(u_lin);
    let rh = tape.mul(r, h_prev)?;
    let zn = tape.concat(&[x, rh], 0)?;
    let n_lin = linear(tape, wn, bn, zn)?;
    let n = tape.tanh(n_lin);
    let ones = tape.leaf(&Tensor::filled(vec![p.hidden_dim, 1], 1.0));
    let inv_u = tape.sub(ones, u)?;
    let a = tape.mul(inv_u, n)?;
    let b = tape.mul(u, h_prev)?;
    tape.add(a, b)
}

/// Run a BiGRU over `seq` and return the concatenated final states
/// `[fwd(x₁..xₙ); bwd(xₙ..x₁)]`, a `[2·hidden, 1]` column.
pub fn bigru_final(tape: &mut Tape, p: &BiGruVars, seq: &[Var]) -> Result<Var, ShapeError> {
    if seq.is_empty() {
        return Err(ShapeError::Empty { op: "bigru_final" });
    }
    let mut hf = tape.leaf(&Tensor::zeros(vec![p.fwd.hidden_dim, 1]));
    for &x in seq {
        hf = gru_step(tape, &p.fwd, hf, x)?;
    }
    let mut hb = tape.leaf(&Tensor::zeros(vec![p.bwd.hidden_dim, 1]));
    for &x in seq.iter().rev() {
        hb = gru_step(tape, &p.bwd, hb, x)?;
    }
    tape.concat(&[hf, hb], 0)
}

// ── Tests ───────────────────────────────────────────────────────────────────
