//! Objective functions, each in a plain value form and a taped form.
//!
//! The taped forms build the loss out of tape primitives so one `backward`
//! call yields parameter gradients. The value forms reuse the same kernels
//! and exist for target branches and diagnostics; both forms agree bitwise
//! on identical inputs because they share the underlying arithmetic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tape::{cosine_values, log_sum_exp_values, Tape, Var};
use crate::tensor::Tensor;

/// Which terms the contrastive denominator includes.
///
/// `Standard` is the usual InfoNCE normalization with the positive pair
/// inside the denominator; the loss is then nonnegative. `NegativesOnly`
/// drops the positive term from the denominator and may go negative.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NceForm {
    Standard,
    NegativesOnly,
}

/// Mean over the batch of 2 - 2 cos(q_i, z_i). Range [0, 4].
pub fn byol_loss<S: Scalar>(q: &Tensor<S>, z: &Tensor<S>) -> Result<S> {
    let (bq, d) = q.dims2()?;
    let (bz, dz) = z.dims2()?;
    if bq != bz || d != dz {
        return Err(Error::shape("byol_loss", "prediction and target shapes must match"));
    }
    if bq == 0 {
        return Err(Error::empty("byol_loss needs at least one row"));
    }
    let two = S::of(2.0);
    let mut acc = S::zero();
    for b in 0..bq {
        let c = cosine_values(q.row(b)?, z.row(b)?)?;
        acc = acc + (two - two * c);
    }
    Ok(acc / S::of(bq as f64))
}

/// Taped form of [`byol_loss`]; gradient flows into `q` and `z` alike, so
/// pass the target branch as a constant leaf to keep it gradient-free.
pub fn byol_loss_tape<S: Scalar>(tape: &mut Tape<S>, q: Var, z: Var) -> Result<Var> {
    let (bq, d) = tape.value(q).dims2()?;
    let (bz, dz) = tape.value(z).dims2()?;
    if bq != bz || d != dz {
        return Err(Error::shape("byol_loss", "prediction and target shapes must match"));
    }
    if bq == 0 {
        return Err(Error::empty("byol_loss needs at least one row"));
    }
    let mut cosines = Vec::with_capacity(bq);
    for b in 0..bq {
        let qb = tape.row(q, b)?;
        let zb = tape.row(z, b)?;
        cosines.push(tape.cosine(qb, zb)?);
    }
    let stacked = tape.concat_scalars(&cosines)?;
    let total = tape.sum(stacked)?;
    // mean(2 - 2c) = 2 - (2/B) * sum(c)
    tape.affine(total, S::of(-2.0 / bq as f64), S::of(2.0))
}

/// InfoNCE for a single anchor against one positive and K negatives.
pub fn nce_loss<S: Scalar>(
    anchor: &[S],
    positive: &[S],
    negatives: &[&[S]],
    t: S,
    form: NceForm,
) -> Result<S> {
    if negatives.is_empty() {
        return Err(Error::param("nce_loss needs at least one negative"));
    }
    if !(t.is_finite() && t > S::zero()) {
        return Err(Error::param("nce temperature must be positive"));
    }
    let s_pos = cosine_values(anchor, positive)? / t;
    let mut scores = Vec::with_capacity(negatives.len() + 1);
    if form == NceForm::Standard {
        scores.push(s_pos);
    }
    for n in negatives {
        scores.push(cosine_values(anchor, n)? / t);
    }
    Ok(log_sum_exp_values(&scores) - s_pos)
}

/// Taped InfoNCE averaged over the batch. `anchors` and `positives` are
/// [B, d]; `negatives` is a [K, d] bank shared across the batch.
pub fn nce_loss_tape<S: Scalar>(
    tape: &mut Tape<S>,
    anchors: Var,
    positives: Var,
    negatives: Var,
    t: S,
    form: NceForm,
) -> Result<Var> {
    let (b, d) = tape.value(anchors).dims2()?;
    let (bp, dp) = tape.value(positives).dims2()?;
    let (k, dn) = tape.value(negatives).dims2()?;
    if b != bp || d != dp || d != dn {
        return Err(Error::shape("nce_loss", "anchor, positive, negative widths must match"));
    }
    if b == 0 {
        return Err(Error::empty("nce_loss needs at least one row"));
    }
    if k == 0 {
        return Err(Error::param("nce_loss needs at least one negative"));
    }
    if !(t.is_finite() && t > S::zero()) {
        return Err(Error::param("nce temperature must be positive"));
    }
    let inv_t = S::one() / t;
    let neg_rows: Vec<Var> = (0..k).map(|i| tape.row(negatives, i)).collect::<Result<_>>()?;
    let mut per_sample = Vec::with_capacity(b);
    for i in 0..b {
        let a = tape.row(anchors, i)?;
        let p = tape.row(positives, i)?;
        let cp = tape.cosine(a, p)?;
        let s_pos = tape.affine(cp, inv_t, S::zero())?;
        let mut scores = Vec::with_capacity(k + 1);
        if form == NceForm::Standard {
            scores.push(s_pos);
        }
        for &n in &neg_rows {
            let cn = tape.cosine(a, n)?;
            scores.push(tape.affine(cn, inv_t, S::zero())?);
        }
        let stacked = tape.concat_scalars(&scores)?;
        let lse = tape.log_sum_exp(stacked)?;
        let neg_pos = tape.affine(s_pos, -S::one(), S::zero())?;
        per_sample.push(tape.add(lse, neg_pos)?);
    }
    let stacked = tape.concat_scalars(&per_sample)?;
    let total = tape.sum(stacked)?;
    tape.affine(total, S::of(1.0 / b as f64), S::zero())
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    fn t2(rows: Vec<Vec<f64>>) -> Tensor {
        let r = rows.len();
        let c = rows[0].len();
        Tensor::new([r, c], rows.into_iter().flatten().collect()).unwrap()
    }

    #[test]
    fn byol_loss_anchors() {
        let q = t2(vec![vec![1.0, 2.0], vec![0.0, 3.0]]);
        assert!(byol_loss(&q, &q.clone()).unwrap().abs() < 1e-12);
        let a = t2(vec![vec![1.0, 0.0]]);
        let b = t2(vec![vec![0.0, 1.0]]);
        assert_eq!(byol_loss(&a, &b).unwrap(), 2.0);
        let c = t2(vec![vec![-1.0, 0.0]]);
        assert_eq!(byol_loss(&a, &c).unwrap(), 4.0);
    }

    #[test]
    fn byol_tape_matches_value_form() {
        let q = t2(vec![vec![1.0, 2.0, -0.5], vec![0.3, -1.0, 0.7]]);
        let z = t2(vec![vec![0.5, 1.0, 0.2], vec![-0.3, 0.4, 1.1]]);
        let want = byol_loss(&q, &z).unwrap();
        let mut tape = Tape::new();
        let qv = tape.leaf(&q);
        let zv = tape.leaf(&z);
        let loss = byol_loss_tape(&mut tape, qv, zv).unwrap();
        assert_eq!(tape.value(loss).item().unwrap(), want);
    }

    #[test]
    fn nce_symmetry_gives_log_counts() {
        let a = [1.0, 0.0];
        let p = [1.0, 0.0];
        let n = [1.0, 0.0];
        let negs: Vec<&[f64]> = vec![&n];
        let got = nce_loss(&a, &p, &negs, 0.37, NceForm::Standard).unwrap();
        assert!((got - std::f64::consts::LN_2).abs() < 1e-15);
        let negs: Vec<&[f64]> = vec![&n; 7];
        let got = nce_loss(&a, &p, &negs, 2.0, NceForm::Standard).unwrap();
        assert!((got - 8f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn nce_opposed_negative_frozen_value() {
        let a = [1.0, 0.0];
        let p = [1.0, 0.0];
        let n = [-1.0, 0.0];
        let negs: Vec<&[f64]> = vec![&n];
        let got = nce_loss(&a, &p, &negs, 1.0, NceForm::Standard).unwrap();
        assert!((got - 0.1269280110429725).abs() < 1e-15);
    }

    #[test]
    fn negatives_only_form_drops_the_positive_term() {
        let a = [1.0, 0.0];
        let p = [1.0, 0.0];
        let n = [-1.0, 0.0];
        let negs: Vec<&[f64]> = vec![&n];
        // lse([-1]) - 1 = -2
        let got = nce_loss(&a, &p, &negs, 1.0, NceForm::NegativesOnly).unwrap();
        assert!((got + 2.0).abs() < 1e-15);
    }

    #[test]
    fn nce_rejects_bad_inputs() {
        let a = [1.0, 0.0];
        let empty: Vec<&[f64]> = vec![];
        assert!(nce_loss(&a, &a, &empty, 1.0, NceForm::Standard).is_err());
        let n = [0.5, 0.5];
        let negs: Vec<&[f64]> = vec![&n];
        assert!(nce_loss(&a, &a, &negs, 0.0, NceForm::Standard).is_err());
        let zero = [0.0, 0.0];
        assert!(nce_loss(&zero, &a, &negs, 1.0, NceForm::Standard).is_err());
    }

    #[test]
    fn nce_tape_matches_value_form() {
        let anchors = t2(vec![vec![1.0, 0.4, -0.2], vec![0.2, 0.9, 0.5]]);
        let positives = t2(vec![vec![0.8, 0.1, 0.0], vec![-0.4, 1.0, 0.3]]);
        let negatives = t2(vec![vec![0.1, -0.7, 0.2], vec![0.6, 0.6, -0.6]]);
        for form in [NceForm::Standard, NceForm::NegativesOnly] {
            let mut want = 0.0;
            for i in 0..2 {
                let negs: Vec<&[f64]> =
                    (0..2).map(|k| negatives.row(k).unwrap()).collect();
                want += nce_loss(
                    anchors.row(i).unwrap(),
                    positives.row(i).unwrap(),
                    &negs,
                    0.2,
                    form,
                )
                .unwrap();
            }
            want /= 2.0;
            let mut tape = Tape::new();
            let a = tape.leaf(&anchors);
            let p = tape.leaf(&positives);
            let n = tape.leaf(&negatives);
            let loss = nce_loss_tape(&mut tape, a, p, n, 0.2, form).unwrap();
            let got = tape.value(loss).item().unwrap();
            assert!((got - want).abs() < 1e-15, "{form:?}: {got} vs {want}");
        }
    }
}
