//! Stacked LSTM with a sigmoid dense head, trained by truncated BPTT.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Weights of one LSTM layer; gate blocks ordered input, forget, cell, output.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct LstmLayer {
    pub inputs: usize,
    pub hidden: usize,
    /// `4H × (I + H)`, row-major.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Network {
    pub layers: Vec<LstmLayer>,
    pub head: Dense,
}

#[derive(Clone, Debug)]
pub(crate) struct State {
    pub h: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
}

/// Activations of one layer at one step.
struct StepCache {
    concat: Vec<f64>,
    c_prev: Vec<f64>,
    gates: Vec<f64>,
    c: Vec<f64>,
}

pub(crate) struct Grads {
    pub layers: Vec<(Vec<f64>, Vec<f64>)>,
    pub head: (Vec<f64>, Vec<f64>),
}

impl LstmLayer {
    fn new(inputs: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        let cols = inputs + hidden;
        let limit = (6.0 / (cols + 4 * hidden) as f64).sqrt();
        let weight = (0..4 * hidden * cols).map(|_| rng.gen_range(-limit..limit)).collect();
        let mut bias = vec![0.0; 4 * hidden];
        // Forget gates start open.
        bias[hidden..2 * hidden].iter_mut().for_each(|b| *b = 1.0);
        Self {
            inputs,
            hidden,
            weight,
            bias,
        }
    }

    fn step(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> (Vec<f64>, StepCache) {
        let hd = self.hidden;
        let mut concat = Vec::with_capacity(self.inputs + hd);
        concat.extend_from_slice(x);
        concat.extend_from_slice(h_prev);
        let cols = concat.len();
        let mut gates: Vec<f64> = self
            .weight
            .chunks_exact(cols)
            .zip(&self.bias)
            .map(|(row, b)| b + row.iter().zip(&concat).map(|(w, v)| w * v).sum::<f64>())
            .collect();
        for (j, z) in gates.iter_mut().enumerate() {
            *z = if (2 * hd..3 * hd).contains(&j) { z.tanh() } else { sigmoid(*z) };
        }
        let mut c = vec![0.0; hd];
        let mut h = vec![0.0; hd];
        for k in 0..hd {
            let (i, f, g, o) = (gates[k], gates[hd + k], gates[2 * hd + k], gates[3 * hd + k]);
            c[k] = f * c_prev[k] + i * g;
            h[k] = o * c[k].tanh();
        }
        let cache = StepCache {
            concat,
            c_prev: c_prev.to_vec(),
            gates,
            c,
        };
        (h, cache)
    }

    /// Returns `(d input, d h_prev, d c_prev)`, accumulating weight gradients.
    fn backward(&self, cache: &StepCache, dh: &[f64], dc_next: &[f64], gw: &mut [f64], gb: &mut [f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let hd = self.hidden;
        let g = &cache.gates;
        let mut dz = vec![0.0; 4 * hd];
        let mut dc_prev = vec![0.0; hd];
        for k in 0..hd {
            let (i, f, gg, o) = (g[k], g[hd + k], g[2 * hd + k], g[3 * hd + k]);
            let tc = cache.c[k].tanh();
            let dc = dc_next[k] + dh[k] * o * (1.0 - tc * tc);
            dz[k] = dc * gg * i * (1.0 - i);
            dz[hd + k] = dc * cache.c_prev[k] * f * (1.0 - f);
            dz[2 * hd + k] = dc * i * (1.0 - gg * gg);
            dz[3 * hd + k] = dh[k] * tc * o * (1.0 - o);
            dc_prev[k] = dc * f;
        }
        let cols = cache.concat.len();
        let mut dconcat = vec![0.0; cols];
        for (r, &d) in dz.iter().enumerate() {
            gb[r] += d;
            let row = &self.weight[r * cols..(r + 1) * cols];
            let grow = &mut gw[r * cols..(r + 1) * cols];
            for j in 0..cols {
                grow[j] += d * cache.concat[j];
                dconcat[j] += d * row[j];
            }
        }
        let dh_prev = dconcat.split_off(self.inputs);
        (dconcat, dh_prev, dc_prev)
    }
}

impl Dense {
    fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.weight
            .chunks_exact(self.inputs)
            .zip(&self.bias)
            .map(|(row, b)| sigmoid(b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()))
            .collect()
    }
}

impl Network {
    pub fn new(inputs: usize, hidden: usize, layers: usize, outputs: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = (0..layers)
            .map(|l| LstmLayer::new(if l == 0 { inputs } else { hidden }, hidden, &mut rng))
            .collect();
        let limit = (6.0 / (hidden + outputs) as f64).sqrt();
        let head = Dense {
            inputs: hidden,
            outputs,
            weight: (0..hidden * outputs).map(|_| rng.gen_range(-limit..limit)).collect(),
            bias: vec![0.0; outputs],
        };
        Self { layers, head }
    }

    pub fn zero_state(&self) -> State {
        State {
            h: self.layers.iter().map(|l| vec![0.0; l.hidden]).collect(),
            c: self.layers.iter().map(|l| vec![0.0; l.hidden]).collect(),
        }
    }

    pub fn zero_grads(&self) -> Grads {
        Grads {
            layers: self
                .layers
                .iter()
                .map(|l| (vec![0.0; l.weight.len()], vec![0.0; l.bias.len()]))
                .collect(),
            head: (vec![0.0; self.head.weight.len()], vec![0.0; self.head.bias.len()]),
        }
    }

    /// Advance one step and return the prediction.
    pub fn predict(&self, x: &[f64], state: &mut State) -> Vec<f64> {
        let mut input = x.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            let (h, cache) = layer.step(&input, &state.h[l], &state.c[l]);
            state.c[l] = cache.c;
            state.h[l] = h.clone();
            input = h;
        }
        self.head.forward(&input)
    }

    /// Forward over `inputs`, then backpropagate the mean of per-step
    /// `‖ŷ − target‖² / D`. Returns the per-step errors; `state` is advanced.
    pub fn train_chunk(&self, inputs: &[Vec<f64>], targets: &[Vec<f64>], state: &mut State, grads: &mut Grads) -> Vec<f64> {
        let steps = inputs.len();
        let d = self.head.outputs as f64;
        let mut caches: Vec<Vec<StepCache>> = Vec::with_capacity(steps);
        let mut tops = Vec::with_capacity(steps);
        let mut preds = Vec::with_capacity(steps);
        for x in inputs {
            let mut input = x.clone();
            let mut step = Vec::with_capacity(self.layers.len());
            for (l, layer) in self.layers.iter().enumerate() {
                let (h, cache) = layer.step(&input, &state.h[l], &state.c[l]);
                state.c[l] = cache.c.clone();
                state.h[l] = h.clone();
                step.push(cache);
                input = h;
            }
            preds.push(self.head.forward(&input));
            tops.push(input);
            caches.push(step);
        }
        let errors: Vec<f64> = preds
            .iter()
            .zip(targets)
            .map(|(p, y)| p.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / d)
            .collect();

        let nl = self.layers.len();
        let mut dh_next: Vec<Vec<f64>> = self.layers.iter().map(|l| vec![0.0; l.hidden]).collect();
        let mut dc_next = dh_next.clone();
        let scale = 2.0 / (d * steps as f64);
        for t in (0..steps).rev() {
            let head = &self.head;
            let mut dtop = vec![0.0; head.inputs];
            for (o, (&p, &y)) in preds[t].iter().zip(&targets[t]).enumerate() {
                let dz = scale * (p - y) * p * (1.0 - p);
                grads.head.1[o] += dz;
                for j in 0..head.inputs {
                    grads.head.0[o * head.inputs + j] += dz * tops[t][j];
                    dtop[j] += dz * head.weight[o * head.inputs + j];
                }
            }
            let mut dh_above = dtop;
            for l in (0..nl).rev() {
                let dh: Vec<f64> = dh_above.iter().zip(&dh_next[l]).map(|(a, b)| a + b).collect();
                let (gw, gb) = &mut grads.layers[l];
                let (dx, dh_prev, dc_prev) = self.layers[l].backward(&caches[t][l], &dh, &dc_next[l], gw, gb);
                dh_next[l] = dh_prev;
                dc_next[l] = dc_prev;
                dh_above = dx;
            }
        }
        errors
    }

    pub fn params_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out = Vec::new();
        for l in &mut self.layers {
            out.push(&mut l.weight);
            out.push(&mut l.bias);
        }
        out.push(&mut self.head.weight);
        out.push(&mut self.head.bias);
        out
    }
}

impl Grads {
    pub fn flat(&self) -> Vec<&Vec<f64>> {
        let mut out = Vec::new();
        for (w, b) in &self.layers {
            out.push(w);
            out.push(b);
        }
        out.push(&self.head.0);
        out.push(&self.head.1);
        out
    }
}
