//! Stochastic view generation.
//!
//! Images get the classic pipeline: random crop with bilinear resize back to
//! the original frame, horizontal flip, brightness and contrast jitter, and
//! additive pixel noise, with the result clamped to [0, 1]. Plain feature
//! vectors get the subset that is meaningful off a pixel grid: contrast
//! (scale about the mean), brightness (shift), and additive noise, unclamped.
//!
//! Every stage whose magnitude is zero is skipped outright, so the all-zero
//! parameter set is a bit-exact identity and consumes no randomness.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{standard_normal, uniform};
use crate::scalar::Scalar;

/// Jitter magnitudes for one view. All fields default to the identity.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct AugmentParams<S: Scalar = f64> {
    /// Crop size (height, width) taken at a random offset, then resized back.
    /// `None` keeps the full frame. Ignored for vector inputs.
    pub crop: Option<(usize, usize)>,
    /// Probability of mirroring along the width axis. Ignored for vectors.
    pub flip_prob: S,
    /// Additive shift drawn from U[-brightness, brightness].
    pub brightness: S,
    /// Scale about the mean drawn from U[1-contrast, 1+contrast].
    pub contrast: S,
    /// Standard deviation of elementwise Gaussian noise.
    pub noise_std: S,
}

impl<S: Scalar> Default for AugmentParams<S> {
    fn default() -> Self {
        AugmentParams {
            crop: None,
            flip_prob: S::zero(),
            brightness: S::zero(),
            contrast: S::zero(),
            noise_std: S::zero(),
        }
    }
}

impl<S: Scalar> AugmentParams<S> {
    /// Noise-only jitter, the workhorse for synthetic vector datasets.
    pub fn noise(std: S) -> Self {
        AugmentParams { noise_std: std, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some((ch, cw)) = self.crop {
            if ch == 0 || cw == 0 {
                return Err(Error::param("crop extents must be positive"));
            }
        }
        for (name, v) in [
            ("flip_prob", self.flip_prob),
            ("brightness", self.brightness),
            ("contrast", self.contrast),
            ("noise_std", self.noise_std),
        ] {
            if !(v.is_finite() && v >= S::zero()) {
                return Err(Error::param(format!("{name} must be finite and nonnegative")));
            }
        }
        if self.flip_prob > S::one() {
            return Err(Error::param("flip_prob must lie in [0, 1]"));
        }
        Ok(())
    }

    fn is_identity_for_vectors(&self) -> bool {
        self.brightness == S::zero() && self.contrast == S::zero() && self.noise_std == S::zero()
    }
}

/// One augmented view of a channels-first `c`×`h`×`w` image in [0, 1].
pub fn augment_image<S: Scalar>(
    image: &[S],
    c: usize,
    h: usize,
    w: usize,
    params: &AugmentParams<S>,
    rng: &mut impl Rng,
) -> Result<Vec<S>> {
    params.validate()?;
    if c == 0 || h == 0 || w == 0 || image.len() != c * h * w {
        return Err(Error::shape("augment_image", "image length must equal c*h*w"));
    }
    let mut out = image.to_vec();
    let mut touched = false;

    if let Some((ch, cw)) = params.crop {
        if ch > h || cw > w {
            return Err(Error::param(format!(
                "crop {ch}x{cw} exceeds image {h}x{w}"
            )));
        }
        if ch != h || cw != w {
            let top = rng.gen_range(0..=h - ch);
            let left = rng.gen_range(0..=w - cw);
            out = resize_bilinear(&out, c, h, w, top, left, ch, cw);
            touched = true;
        }
    }

    if params.flip_prob > S::zero() {
        let u: S = uniform(rng, S::zero(), S::one());
        if u < params.flip_prob {
            flip_width(&mut out, c, h, w);
            touched = true;
        }
    }

    if params.contrast > S::zero() {
        let s = uniform(rng, S::one() - params.contrast, S::one() + params.contrast);
        let m = mean(&out);
        for v in &mut out {
            *v = m + s * (*v - m);
        }
        touched = true;
    }

    if params.brightness > S::zero() {
        let b = uniform(rng, -params.brightness, params.brightness);
        for v in &mut out {
            *v = *v + b;
        }
        touched = true;
    }

    if params.noise_std > S::zero() {
        for v in &mut out {
            *v = *v + params.noise_std * standard_normal(rng);
        }
        touched = true;
    }

    if touched {
        for v in &mut out {
            *v = v.max(S::zero()).min(S::one());
        }
    }
    Ok(out)
}

/// One augmented view of a plain feature vector. No clamping: vector data
/// has no natural range.
pub fn augment_vector<S: Scalar>(
    x: &[S],
    params: &AugmentParams<S>,
    rng: &mut impl Rng,
) -> Result<Vec<S>> {
    params.validate()?;
    if x.is_empty() {
        return Err(Error::empty("augment_vector needs a nonempty input"));
    }
    let mut out = x.to_vec();
    if params.is_identity_for_vectors() {
        return Ok(out);
    }

    if params.contrast > S::zero() {
        let s = uniform(rng, S::one() - params.contrast, S::one() + params.contrast);
        let m = mean(&out);
        for v in &mut out {
            *v = m + s * (*v - m);
        }
    }
    if params.brightness > S::zero() {
        let b = uniform(rng, -params.brightness, params.brightness);
        for v in &mut out {
            *v = *v + b;
        }
    }
    if params.noise_std > S::zero() {
        for v in &mut out {
            *v = *v + params.noise_std * standard_normal(rng);
        }
    }
    Ok(out)
}

fn mean<S: Scalar>(xs: &[S]) -> S {
    let mut acc = S::zero();
    for &x in xs {
        acc = acc + x;
    }
    acc / S::of(xs.len() as f64)
}

fn flip_width<S: Scalar>(img: &mut [S], c: usize, h: usize, w: usize) {
    for ci in 0..c {
        for y in 0..h {
            let row = &mut img[ci * h * w + y * w..ci * h * w + (y + 1) * w];
            row.reverse();
        }
    }
}

/// Resizes the crop window back to the full `h`×`w` frame.
/// Source coordinates follow the half-pixel convention
/// src = (dst + 0.5) * crop/full - 0.5, clamped to the window.
#[allow(clippy::too_many_arguments)]
fn resize_bilinear<S: Scalar>(
    img: &[S],
    c: usize,
    h: usize,
    w: usize,
    top: usize,
    left: usize,
    ch: usize,
    cw: usize,
) -> Vec<S> {
    let mut out = vec![S::zero(); c * h * w];
    let sy = ch as f64 / h as f64;
    let sx = cw as f64 / w as f64;
    for ci in 0..c {
        let plane = &img[ci * h * w..(ci + 1) * h * w];
        for y in 0..h {
            let fy = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, (ch - 1) as f64);
            let y0 = fy.floor() as usize;
            let y1 = (y0 + 1).min(ch - 1);
            let wy = S::of(fy - y0 as f64);
            for x in 0..w {
                let fx = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, (cw - 1) as f64);
                let x0 = fx.floor() as usize;
                let x1 = (x0 + 1).min(cw - 1);
                let wx = S::of(fx - x0 as f64);
                let at = |yy: usize, xx: usize| plane[(top + yy) * w + (left + xx)];
                let top_row = at(y0, x0) * (S::one() - wx) + at(y0, x1) * wx;
                let bot_row = at(y1, x0) * (S::one() - wx) + at(y1, x1) * wx;
                out[ci * h * w + y * w + x] = top_row * (S::one() - wy) + bot_row * wy;
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
