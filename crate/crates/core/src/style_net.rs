//! Style feature extraction and classification.
//!
//! The full model runs one LSTM over the foreground snippet embeddings and one
//! over the background embeddings. A scorer per branch gates every step with
//! a sigmoid weight, and the style feature is the concatenation of the two
//! weighted sums of hidden states. A dense layer and a softmax classify it.
//! The ablation variants drop the attention (uniform weights) or one branch.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map};

use crate::error::{Error, Result};
use crate::features::SnippetEmbedding;
use crate::style::StyleLabel;
use crate::training::{ensure_finite, minibatches, EpochLog};
use imfilm_nn::ops::{cross_entropy, cross_entropy_logit_grad, sigmoid, softmax_slice};
use imfilm_nn::{container, seeded_rng, Adamax, AdamaxConfig, Dense, LstmCache, LstmLayer, ParamSet};

const FORMAT_VERSION: &str = "imfilm-style-net-1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    FgOnly,
    BgOnly,
    FgBg,
    FgBgAtt,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::FgOnly, Variant::BgOnly, Variant::FgBg, Variant::FgBgAtt];

    pub fn name(self) -> &'static str {
        match self {
            Variant::FgOnly => "fg-only",
            Variant::BgOnly => "bg-only",
            Variant::FgBg => "fg-bg",
            Variant::FgBgAtt => "fg-bg-att",
        }
    }

    fn uses_fg(self) -> bool {
        self != Variant::BgOnly
    }

    fn uses_bg(self) -> bool {
        self != Variant::FgOnly
    }

    fn attention(self) -> bool {
        self == Variant::FgBgAtt
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Argument(format!("unknown style-net variant `{s}`")))
    }
}

/// Layer sizes. Single-branch variants use twice the hidden width so that the
/// style feature keeps its size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StyleDims {
    pub fg_in: usize,
    pub bg_in: usize,
    pub hidden: usize,
    pub att_hidden: usize,
}

impl Default for StyleDims {
    fn default() -> Self {
        Self {
            fg_in: crate::features::FG_EMBED,
            bg_in: crate::features::BG_EMBED,
            hidden: 64,
            att_hidden: 32,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StyleTrainConfig {
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub lambda_fg: f64,
    pub lambda_bg: f64,
    pub seed: u64,
}

impl Default for StyleTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 60,
            batch: 8,
            lr: 0.001,
            lambda_fg: 0.01,
            lambda_bg: 0.01,
            seed: 23,
        }
    }
}

#[derive(Debug, Clone)]
struct Branch {
    fg: bool,
    lstm: LstmLayer,
    att: Option<(Dense, Dense)>,
}

/// Style network parameters plus their architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct StyleNet {
    pub variant: Variant,
    pub dims: StyleDims,
    pub params: ParamSet,
}

/// Per-branch outputs of a forward pass.
#[derive(Debug, Clone)]
pub struct BranchTrace {
    pub caches: Vec<LstmCache>,
    /// Scorer hidden activations, empty without attention.
    att_hidden: Vec<Vec<f64>>,
    pub beta: Vec<f64>,
    pub summary: Vec<f64>,
}

impl BranchTrace {
    pub fn hidden(&self, t: usize) -> &[f64] {
        &self.caches[t].h
    }
}

#[derive(Debug, Clone)]
pub struct StyleForward {
    pub v: Vec<f64>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
    pub fg: Option<BranchTrace>,
    pub bg: Option<BranchTrace>,
}

impl StyleForward {
    pub fn predicted(&self) -> StyleLabel {
        StyleLabel::from_index(argmax(&self.probs)).expect("five classes")
    }

    /// `(beta_fg, beta_bg)` per step; a missing branch reports zeros.
    pub fn attention(&self) -> (Vec<f64>, Vec<f64>) {
        let t = self.fg.as_ref().or(self.bg.as_ref()).map(|b| b.beta.len()).unwrap_or(0);
        let get = |b: &Option<BranchTrace>| b.as_ref().map(|b| b.beta.clone()).unwrap_or_else(|| vec![0.0; t]);
        (get(&self.fg), get(&self.bg))
    }
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Classification loss with the attention penalty:
/// `-ln p_true + l1/T sum|b_fg| + l2/T sum|b_bg|`, with the probability
/// floored at 1e-12. The flag reports whether the floor was hit.
pub fn style_loss(probs: &[f64], y: StyleLabel, beta_fg: &[f64], beta_bg: &[f64], l1: f64, l2: f64) -> (f64, bool) {
    let (ce, floored) = cross_entropy(probs, y.index());
    let t = beta_fg.len().max(beta_bg.len()).max(1) as f64;
    let reg =
        l1 / t * beta_fg.iter().map(|b| b.abs()).sum::<f64>() + l2 / t * beta_bg.iter().map(|b| b.abs()).sum::<f64>();
    (ce + reg, floored)
}

impl StyleNet {
    pub fn new(variant: Variant, dims: StyleDims, seed: u64) -> Result<Self> {
        let net = Self {
            variant,
            dims,
            params: ParamSet::new(),
        };
        let mut params = ParamSet::new();
        let mut rng = seeded_rng(seed);
        for b in net.branches() {
            b.lstm.init(&mut params, &mut rng)?;
            if let Some((l1, l2)) = &b.att {
                l1.init(&mut params, &mut rng)?;
                l2.init(&mut params, &mut rng)?;
            }
        }
        net.classifier().init(&mut params, &mut rng)?;
        Ok(Self { params, ..net })
    }

    fn branch_hidden(&self) -> usize {
        match self.variant {
            Variant::FgOnly | Variant::BgOnly => 2 * self.dims.hidden,
            _ => self.dims.hidden,
        }
    }

    fn branches(&self) -> Vec<Branch> {
        let h = self.branch_hidden();
        let mut out = Vec::new();
        for (fg, used) in [(true, self.variant.uses_fg()), (false, self.variant.uses_bg())] {
            if !used {
                continue;
            }
            let (name, input) = if fg {
                ("fg", self.dims.fg_in)
            } else {
                ("bg", self.dims.bg_in)
            };
            let att = self.variant.attention().then(|| {
                (
                    Dense::new(&format!("att_{name}.l1"), h, self.dims.att_hidden),
                    Dense::new(&format!("att_{name}.l2"), self.dims.att_hidden, 1),
                )
            });
            out.push(Branch {
                fg,
                lstm: LstmLayer::new(&format!("lstm_{name}"), input, h),
                att,
            });
        }
        out
    }

    pub fn feature_dim(&self) -> usize {
        self.branches().len() * self.branch_hidden()
    }

    fn classifier(&self) -> Dense {
        Dense::new("cls", self.feature_dim(), StyleLabel::COUNT)
    }

    fn run_branch(&self, p: &ParamSet, b: &Branch, xs: &[&[f64]]) -> Result<BranchTrace> {
        let caches = b.lstm.forward_seq(p, xs)?;
        let t = caches.len();
        let h = self.branch_hidden();
        let mut beta = Vec::with_capacity(t);
        let mut att_hidden = Vec::new();
        for c in &caches {
            match &b.att {
                Some((l1, l2)) => {
                    let a: Vec<f64> = l1.forward(p, &c.h)?.into_iter().map(f64::tanh).collect();
                    let s = l2.forward(p, &a)?[0];
                    beta.push(sigmoid(s));
                    att_hidden.push(a);
                }
                None => beta.push(1.0 / t as f64),
            }
        }
        let mut summary = vec![0.0; h];
        for (c, bt) in caches.iter().zip(&beta) {
            for (s, x) in summary.iter_mut().zip(&c.h) {
                *s += bt * x;
            }
        }
        Ok(BranchTrace {
            caches,
            att_hidden,
            beta,
            summary,
        })
    }

    pub fn forward_with(&self, p: &ParamSet, seq: &[SnippetEmbedding]) -> Result<StyleForward> {
        if seq.is_empty() {
            return Err(Error::Argument("style network needs at least one snippet".into()));
        }
        let mut fg = None;
        let mut bg = None;
        let mut v = Vec::with_capacity(self.feature_dim());
        for b in self.branches() {
            let xs: Vec<&[f64]> = seq
                .iter()
                .map(|s| if b.fg { s.fg.as_slice() } else { s.bg.as_slice() })
                .collect();
            let tr = self.run_branch(p, &b, &xs)?;
            v.extend_from_slice(&tr.summary);
            if b.fg {
                fg = Some(tr);
            } else {
                bg = Some(tr);
            }
        }
        let logits = self.classifier().forward(p, &v)?;
        let probs = softmax_slice(&logits);
        Ok(StyleForward {
            v,
            logits,
            probs,
            fg,
            bg,
        })
    }

    pub fn forward(&self, seq: &[SnippetEmbedding]) -> Result<StyleForward> {
        self.forward_with(&self.params, seq)
    }

    /// Class probabilities for every prefix `seq[..=t]`, computed in one pass.
    /// The recurrences are causal; only the weighted sums and the classifier
    /// are re-evaluated per prefix (uniform weights are rescaled to `1/(t+1)`).
    pub fn prefix_probs(&self, seq: &[SnippetEmbedding]) -> Result<Vec<Vec<f64>>> {
        let full = self.forward(seq)?;
        let cls = self.classifier();
        let h = self.branch_hidden();
        let traces: Vec<&BranchTrace> = [full.fg.as_ref(), full.bg.as_ref()].into_iter().flatten().collect();
        let mut sums = vec![vec![0.0; h]; traces.len()];
        let mut out = Vec::with_capacity(seq.len());
        for t in 0..seq.len() {
            let mut v = Vec::with_capacity(self.feature_dim());
            for (tr, sum) in traces.iter().zip(sums.iter_mut()) {
                let w = if self.variant.attention() { tr.beta[t] } else { 1.0 };
                for (s, x) in sum.iter_mut().zip(&tr.caches[t].h) {
                    *s += w * x;
                }
                if self.variant.attention() {
                    v.extend_from_slice(sum);
                } else {
                    let k = 1.0 / (t + 1) as f64;
                    v.extend(sum.iter().map(|s| s * k));
                }
            }
            out.push(softmax_slice(&cls.forward(&self.params, &v)?));
        }
        Ok(out)
    }

    /// Loss and, optionally, its gradient with respect to `p`.
    pub fn loss_with(
        &self,
        p: &ParamSet,
        seq: &[SnippetEmbedding],
        y: StyleLabel,
        cfg: &StyleTrainConfig,
        grads: Option<&mut ParamSet>,
    ) -> Result<(f64, StyleForward)> {
        let fwd = self.forward_with(p, seq)?;
        let (bf, bb) = fwd.attention();
        let (l1, l2) = if self.variant.attention() {
            (cfg.lambda_fg, cfg.lambda_bg)
        } else {
            (0.0, 0.0)
        };
        let (loss, _) = style_loss(&fwd.probs, y, &bf, &bb, l1, l2);
        let Some(grads) = grads else {
            return Ok((loss, fwd));
        };
        let t = seq.len();
        let dlogits = cross_entropy_logit_grad(&fwd.probs, y.index());
        let dv = self.classifier().backward(p, &fwd.v, &dlogits, grads)?;
        let h = self.branch_hidden();
        let mut offset = 0;
        for b in self.branches() {
            let (tr, lambda) = if b.fg {
                (fwd.fg.as_ref().unwrap(), l1)
            } else {
                (fwd.bg.as_ref().unwrap(), l2)
            };
            let dsum = &dv[offset..offset + h];
            offset += h;
            let mut dh = Vec::with_capacity(t);
            for s in 0..t {
                let c = &tr.caches[s].h;
                let beta = tr.beta[s];
                let mut dc: Vec<f64> = dsum.iter().map(|d| beta * d).collect();
                if let Some((la, lb)) = &b.att {
                    let dbeta = dsum.iter().zip(c).map(|(d, x)| d * x).sum::<f64>() + lambda / t as f64;
                    let ds = dbeta * beta * (1.0 - beta);
                    let a = &tr.att_hidden[s];
                    let da = lb.backward(p, a, &[ds], grads)?;
                    let dpre: Vec<f64> = da.iter().zip(a).map(|(g, x)| g * (1.0 - x * x)).collect();
                    let dc_att = la.backward(p, c, &dpre, grads)?;
                    for (x, y) in dc.iter_mut().zip(dc_att) {
                        *x += y;
                    }
                }
                dh.push(dc);
            }
            b.lstm.backward_seq(p, &tr.caches, &dh, None, grads)?;
        }
        Ok((loss, fwd))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut meta = Map::new();
        meta.insert("format".into(), json!(FORMAT_VERSION));
        meta.insert("variant".into(), json!(self.variant.name()));
        meta.insert(
            "dims".into(),
            serde_json::to_value(self.dims).map_err(|e| Error::format(path, e.to_string()))?,
        );
        container::save(path, &self.params, meta)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (params, side) = container::load(path)?;
        let variant: Variant = side
            .meta_str("variant")
            .ok_or_else(|| Error::format(path, "missing variant"))?
            .parse()?;
        let dims: StyleDims = side
            .meta
            .get("dims")
            .cloned()
            .map(serde_json::from_value)
            .transpose()
            .map_err(|e| Error::format(path, e.to_string()))?
            .ok_or_else(|| Error::format(path, "missing dims"))?;
        let net = Self { variant, dims, params };
        let reference = Self::new(variant, dims, 0)?;
        net.params.check_layout(&reference.params, "style net load")?;
        Ok(net)
    }
}

/// A labelled sequence of snippet embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelledSeq {
    pub id: String,
    pub seq: Vec<SnippetEmbedding>,
    pub label: StyleLabel,
}

/// Row-normalized 5x5 confusion matrix (rows: true class).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Confusion {
    pub counts: [[usize; 5]; 5],
}

impl Confusion {
    pub fn new() -> Self {
        Self { counts: [[0; 5]; 5] }
    }

    pub fn add(&mut self, truth: StyleLabel, pred: StyleLabel) {
        self.counts[truth.index()][pred.index()] += 1;
    }

    /// Row-stochastic matrix; empty rows are all zero.
    pub fn normalized(&self) -> [[f64; 5]; 5] {
        let mut m = [[0.0; 5]; 5];
        for (i, row) in self.counts.iter().enumerate() {
            let n: usize = row.iter().sum();
            if n > 0 {
                for j in 0..5 {
                    m[i][j] = row[j] as f64 / n as f64;
                }
            }
        }
        m
    }

    pub fn accuracy(&self) -> f64 {
        let total: usize = self.counts.iter().flatten().sum();
        let right: usize = (0..5).map(|i| self.counts[i][i]).sum();
        if total == 0 {
            0.0
        } else {
            right as f64 / total as f64
        }
    }

    /// Mean of the diagonal over classes that occur.
    pub fn mean_diagonal(&self) -> f64 {
        let m = self.normalized();
        let rows: Vec<usize> = (0..5).filter(|i| self.counts[*i].iter().sum::<usize>() > 0).collect();
        if rows.is_empty() {
            return 0.0;
        }
        rows.iter().map(|i| m[*i][*i]).sum::<f64>() / rows.len() as f64
    }

    pub fn to_csv(&self) -> String {
        let m = self.normalized();
        let mut s = String::from("true\\pred");
        for l in StyleLabel::ALL {
            s.push(',');
            s.push_str(l.name());
        }
        s.push('\n');
        for l in StyleLabel::ALL {
            s.push_str(l.name());
            for j in 0..5 {
                s.push_str(&format!(",{:.6}", m[l.index()][j]));
            }
            s.push('\n');
        }
        s
    }

    pub fn to_text(&self) -> String {
        let m = self.normalized();
        let mut s = format!("{:>12}", "");
        for l in StyleLabel::ALL {
            s.push_str(&format!("{:>12}", l.name()));
        }
        s.push('\n');
        for l in StyleLabel::ALL {
            s.push_str(&format!("{:>12}", l.name()));
            for j in 0..5 {
                s.push_str(&format!("{:>12.2}", m[l.index()][j]));
            }
            s.push('\n');
        }
        s
    }
}

impl Default for Confusion {
    fn default() -> Self {
        Self::new()
    }
}

pub fn evaluate(net: &StyleNet, data: &[LabelledSeq]) -> Result<(Confusion, f64)> {
    let mut conf = Confusion::new();
    let mut loss = 0.0;
    let cfg = StyleTrainConfig::default();
    for d in data {
        let (l, fwd) = net.loss_with(&net.params, &d.seq, d.label, &cfg, None)?;
        loss += l;
        conf.add(d.label, fwd.predicted());
    }
    Ok((conf, loss / data.len().max(1) as f64))
}

/// Trains one variant and returns the parameters of the epoch with the best
/// validation accuracy (ties go to the lower validation loss, then the
/// earlier epoch).
pub fn train_style_net(
    variant: Variant,
    dims: StyleDims,
    train: &[LabelledSeq],
    val: &[LabelledSeq],
    cfg: &StyleTrainConfig,
) -> Result<(StyleNet, Vec<EpochLog>)> {
    if train.is_empty() {
        return Err(Error::Argument("empty style training set".into()));
    }
    let mut net = StyleNet::new(variant, dims, cfg.seed)?;
    let mut opt = Adamax::new(
        &net.params,
        AdamaxConfig {
            lr: cfg.lr,
            ..AdamaxConfig::default()
        },
    );
    let mut rng = seeded_rng(cfg.seed ^ 0x5717);
    let mut log = Vec::new();
    let mut best: Option<(f64, f64, ParamSet)> = None;
    for epoch in 1..=cfg.epochs {
        let mut total = 0.0;
        for batch in minibatches(train.len(), cfg.batch, &mut rng) {
            let mut g = net.params.zeros_like();
            for &i in &batch {
                let d = &train[i];
                total += net.loss_with(&net.params, &d.seq, d.label, cfg, Some(&mut g))?.0;
            }
            g.scale(1.0 / batch.len() as f64);
            ensure_finite(epoch, total, &g)?;
            opt.update(&mut net.params, &g)?;
        }
        let eval_set = if val.is_empty() { train } else { val };
        let (conf, vloss) = evaluate(&net, eval_set)?;
        let acc = conf.accuracy();
        log.push(EpochLog {
            epoch,
            loss: total / train.len() as f64,
            val: Some(acc),
        });
        let better = match &best {
            None => true,
            Some((a, l, _)) => acc > *a || (acc == *a && vloss < *l),
        };
        if better {
            best = Some((acc, vloss, net.params.clone()));
        }
    }
    if let Some((_, _, p)) = best {
        net.params = p;
    }
    Ok((net, log))
}

/// Attention weights of one video as CSV (`snippet,beta_fg,beta_bg`).
pub fn attention_csv(fwd: &StyleForward) -> String {
    let (f, b) = fwd.attention();
    let mut s = String::from("snippet,beta_fg,beta_bg\n");
    for (i, (x, y)) in f.iter().zip(&b).enumerate() {
        s.push_str(&format!("{i},{x:.9},{y:.9}\n"));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> StyleDims {
        StyleDims {
            fg_in: 3,
            bg_in: 4,
            hidden: 5,
            att_hidden: 3,
        }
    }

    fn seq(t: usize, seed: u64) -> Vec<SnippetEmbedding> {
        use rand::Rng;
        let mut rng = seeded_rng(seed);
        (0..t)
            .map(|_| SnippetEmbedding {
                fg: (0..3).map(|_| rng.random_range(-1.0..1.0)).collect(),
                bg: (0..4).map(|_| rng.random_range(-1.0..1.0)).collect(),
            })
            .collect()
    }

    #[test]
    fn loss_arithmetic() {
        let mut p = [0.0; 5];
        p[2] = 1.0;
        assert_eq!(
            style_loss(&p, StyleLabel::Follow, &[0.0; 3], &[0.0; 3], 0.01, 0.01).0,
            0.0
        );
        let u = [0.2; 5];
        let (l, _) = style_loss(&u, StyleLabel::Follow, &[0.0], &[0.0], 0.01, 0.01);
        assert!((l - 1.6094379124341003).abs() < 1e-12);
        let (l, _) = style_loss(&p, StyleLabel::Follow, &[1.0; 10], &[1.0; 10], 0.01, 0.01);
        assert!((l - 0.02).abs() < 1e-15);
        let (_, floored) = style_loss(&p, StyleLabel::FlyBy, &[0.5], &[0.5], 0.01, 0.01);
        assert!(floored);
    }

    #[test]
    fn single_step_feature_is_weighted_hidden_state() {
        let net = StyleNet::new(Variant::FgBgAtt, tiny(), 1).unwrap();
        let s = seq(1, 2);
        let f = net.forward(&s).unwrap();
        let fg = f.fg.as_ref().unwrap();
        let bg = f.bg.as_ref().unwrap();
        let mut expect: Vec<f64> = fg.hidden(0).iter().map(|x| fg.beta[0] * x).collect();
        expect.extend(bg.hidden(0).iter().map(|x| bg.beta[0] * x));
        assert_eq!(f.v, expect);
    }

    #[test]
    fn zero_classifier_gives_uniform() {
        let mut net = StyleNet::new(Variant::FgBgAtt, tiny(), 1).unwrap();
        net.params.get_mut("cls.w").unwrap().fill(0.0);
        net.params.get_mut("cls.b").unwrap().fill(0.0);
        let f = net.forward(&seq(4, 3)).unwrap();
        assert!(f.probs.iter().all(|p| (p - 0.2).abs() < 1e-15));
    }

    #[test]
    fn empty_sequence_is_rejected() {
        let net = StyleNet::new(Variant::FgBgAtt, tiny(), 1).unwrap();
        assert!(matches!(net.forward(&[]), Err(Error::Argument(_))));
    }

    #[test]
    fn prefix_probs_match_recomputation() {
        for variant in Variant::ALL {
            let net = StyleNet::new(variant, tiny(), 4).unwrap();
            let s = seq(6, 5);
            let pre = net.prefix_probs(&s).unwrap();
            for t in 0..s.len() {
                let f = net.forward(&s[..=t]).unwrap();
                for (a, b) in pre[t].iter().zip(&f.probs) {
                    assert!((a - b).abs() < 1e-12, "{variant} t={t}");
                }
            }
        }
    }

    #[test]
    fn feature_is_recomputable_from_trace() {
        let net = StyleNet::new(Variant::FgBgAtt, tiny(), 8).unwrap();
        let f = net.forward(&seq(7, 9)).unwrap();
        let mut v = Vec::new();
        for tr in [f.fg.as_ref().unwrap(), f.bg.as_ref().unwrap()] {
            let mut s = vec![0.0; 5];
            for t in 0..7 {
                for (a, x) in s.iter_mut().zip(tr.hidden(t)) {
                    *a += tr.beta[t] * x;
                }
            }
            v.extend(s);
        }
        assert_eq!(v, f.v);
        assert!(f.fg.as_ref().unwrap().beta.iter().all(|b| *b > 0.0 && *b < 1.0));
    }

    #[test]
    fn confusion_rows_are_stochastic() {
        let mut c = Confusion::new();
        c.add(StyleLabel::Follow, StyleLabel::Follow);
        c.add(StyleLabel::Follow, StyleLabel::Orbiting);
        c.add(StyleLabel::FlyBy, StyleLabel::FlyBy);
        let m = c.normalized();
        assert_eq!(m[StyleLabel::Follow.index()].iter().sum::<f64>(), 1.0);
        assert!((c.accuracy() - 2.0 / 3.0).abs() < 1e-15);
        assert!((c.mean_diagonal() - 0.75).abs() < 1e-15);
    }
}
