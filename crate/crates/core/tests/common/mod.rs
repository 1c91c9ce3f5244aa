#![allow(dead_code)]

use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use segmin::controller::{ema_filter, CommandFilterState};
use segmin::perception::{
    column_histogram, find_row_center, fuse_masks, gate_by_depth, perceive, segzeros_from_histogram,
    ColumnHistogram,
};
use segmin::{
    DepthMap, Grid, MaskBuffer, PerceptionConfig, RowEstimate, Variant, VegetationMask, VelocityCommand, NO_RETURN,
};

/// Mask history (oldest first) and depth for one perception call.
#[derive(Debug, Clone)]
pub struct Frame {
    pub masks: Vec<VegetationMask>,
    pub depth: DepthMap,
    pub depth_threshold: f64,
    pub window: usize,
}

impl Frame {
    pub fn width(&self) -> usize {
        self.depth.width()
    }

    pub fn buffer(&self) -> MaskBuffer {
        let mut b = MaskBuffer::new(self.masks.len()).unwrap();
        for m in &self.masks {
            b.push(m.clone()).unwrap();
        }
        b
    }

    pub fn config(&self, variant: Variant) -> PerceptionConfig {
        PerceptionConfig {
            depth_threshold: self.depth_threshold,
            smoothing_window: self.window,
            history: self.masks.len(),
            variant,
        }
    }

    pub fn flipped(&self) -> Frame {
        Frame {
            masks: self.masks.iter().map(VegetationMask::flip_horizontal).collect(),
            depth: self.depth.flip_horizontal(),
            ..self.clone()
        }
    }
}

/// Random frame of 8..=224 pixels per side. Densities and empty column
/// bands vary so that every stage, including the zero-run search, sees
/// non-trivial input.
pub fn random_frame(rng: &mut ChaCha8Rng) -> Frame {
    let w = rng.random_range(8..=224usize);
    let h = rng.random_range(8..=224usize);
    let history = rng.random_range(1..=4usize);
    let d_th = rng.random_range(0.5..10.0);
    let band = rng.random_bool(0.6).then(|| {
        let a = rng.random_range(0..w);
        (a, rng.random_range(a..w))
    });
    let masks = (0..history)
        .map(|_| {
            let p = rng.random_range(0.0..0.5);
            let cells = (0..w * h)
                .map(|k| {
                    let j = k % w;
                    let blank = band.is_some_and(|(a, b)| (a..=b).contains(&j));
                    !blank && rng.random_bool(p)
                })
                .collect();
            VegetationMask::from_cells(w, h, cells).unwrap()
        })
        .collect();
    let depth = (0..w * h)
        .map(|_| match rng.random_range(0..20) {
            0 | 1 => NO_RETURN,
            2 => d_th,
            _ => rng.random_range(0.0..12.0),
        })
        .collect();
    let max_window = if w % 2 == 1 { w } else { w - 1 };
    let window = 2 * rng.random_range(0..=max_window.min(41) / 2) + 1;
    Frame {
        masks,
        depth: DepthMap::from_cells(w, h, depth).unwrap(),
        depth_threshold: d_th,
        window,
    }
}

pub const PROPTEST_CASES: u32 = 500;

/// Small frames whose depths are multiples of 0.5 m with an 8 m threshold,
/// so inverse-depth weights are exact dyadic fractions and every sum is
/// computed without rounding.
pub fn frame_strategy() -> impl Strategy<Value = Frame> {
    (3usize..48, 1usize..12, 1usize..=3)
        .prop_flat_map(|(w, h, k)| {
            let max_window = if w % 2 == 1 { w } else { w - 1 };
            (
                Just((w, h)),
                prop::collection::vec(prop::collection::vec(prop::bool::weighted(0.3), w * h), k),
                prop::collection::vec(0u32..=20, w * h),
                0..=max_window / 2,
            )
        })
        .prop_map(|((w, h), masks, depth, half)| Frame {
            masks: masks
                .into_iter()
                .map(|cells| VegetationMask::from_cells(w, h, cells).unwrap())
                .collect(),
            depth: DepthMap::from_cells(
                w,
                h,
                depth
                    .into_iter()
                    .map(|k| if k == 20 { NO_RETURN } else { f64::from(k) * 0.5 })
                    .collect(),
            )
            .unwrap(),
            depth_threshold: 8.0,
            window: 2 * half + 1,
        })
}

/// Flipping the frame left-right reflects the estimate about the middle
/// column. Tied columns reflect exactly; only their average is rounded.
pub fn mirror_property(frame: &Frame) -> Result<(), TestCaseError> {
    let flipped = frame.flipped();
    let last = frame.width() as f64 - 1.0;
    for variant in Variant::ALL {
        let a = perceive(&frame.buffer(), &frame.depth, &frame.config(variant)).unwrap();
        let b = perceive(&flipped.buffer(), &flipped.depth, &flipped.config(variant)).unwrap();
        match (a, b) {
            (RowEstimate::Center(x), RowEstimate::Center(y)) => {
                prop_assert!((last - x - y).abs() < 1e-9, "{}: {} vs {}", variant, x, y)
            }
            _ => prop_assert_eq!(a, b, "{}", variant),
        }
    }
    Ok(())
}

pub fn histogram_strategy() -> impl Strategy<Value = (Vec<f64>, f64)> {
    (
        prop::collection::vec((0u32..200).prop_map(f64::from), 1..64),
        1e-3..1e3f64,
    )
}

/// Scaling a histogram by a positive factor moves neither the minimum nor the
/// widest zero run.
pub fn scale_property((values, c): &(Vec<f64>, f64)) -> Result<(), TestCaseError> {
    let h = ColumnHistogram::new(values.clone()).unwrap();
    let scaled = ColumnHistogram::new(values.iter().map(|v| v * c).collect()).unwrap();
    prop_assert_eq!(find_row_center(&h), find_row_center(&scaled));
    prop_assert_eq!(segzeros_from_histogram(&h), segzeros_from_histogram(&scaled));
    Ok(())
}

pub fn ema_strategy() -> impl Strategy<Value = (Vec<(f64, f64)>, f64)> {
    (
        prop::collection::vec((0.0..1.0f64, -1.0..1.0f64), 1..40),
        (1e-6..=1.0f64),
    )
}

/// Every smoothed command lies between the previous output and the new
/// input, hence inside the hull of all inputs so far.
pub fn ema_convexity_property((cmds, lambda): &(Vec<(f64, f64)>, f64)) -> Result<(), TestCaseError> {
    let eps = 1e-12;
    let mut state = CommandFilterState::new();
    let (mut lo, mut hi) = ((f64::INFINITY, f64::INFINITY), (f64::NEG_INFINITY, f64::NEG_INFINITY));
    for &(v, w) in cmds {
        let prev = state.previous();
        let out = ema_filter(&mut state, VelocityCommand::new(v, w), *lambda).unwrap();
        if let Some(p) = prev {
            prop_assert!(out.v_x >= p.v_x.min(v) - eps && out.v_x <= p.v_x.max(v) + eps);
            prop_assert!(out.omega_z >= p.omega_z.min(w) - eps && out.omega_z <= p.omega_z.max(w) + eps);
        } else {
            prop_assert_eq!(out, VelocityCommand::new(v, w));
        }
        lo = (lo.0.min(v), lo.1.min(w));
        hi = (hi.0.max(v), hi.1.max(w));
        prop_assert!(out.v_x >= lo.0 - eps && out.v_x <= hi.0 + eps);
        prop_assert!(out.omega_z >= lo.1 - eps && out.omega_z <= hi.1 + eps);
    }
    Ok(())
}

pub fn extra_mask_strategy() -> impl Strategy<Value = (Frame, Vec<bool>)> {
    frame_strategy().prop_flat_map(|f| {
        let n = f.depth.width() * f.depth.height();
        (Just(f), prop::collection::vec(prop::bool::weighted(0.3), n))
    })
}

/// Fusing one more mask never clears a pixel, so gated column counts can
/// only grow.
pub fn or_monotone_property((frame, extra): &(Frame, Vec<bool>)) -> Result<(), TestCaseError> {
    let (w, h) = (frame.width(), frame.depth.height());
    let before = fuse_masks(&frame.buffer()).unwrap();
    for m in &frame.masks {
        for (f, c) in before.cells().iter().zip(m.cells()) {
            prop_assert!(*f || !*c);
        }
    }
    let mut grown = MaskBuffer::new(frame.masks.len() + 1).unwrap();
    for m in &frame.masks {
        grown.push(m.clone()).unwrap();
    }
    grown.push(VegetationMask::from_cells(w, h, extra.clone()).unwrap()).unwrap();
    let after = fuse_masks(&grown).unwrap();
    for (b, a) in before.cells().iter().zip(after.cells()) {
        prop_assert!(!*b || *a);
    }
    let hb = column_histogram(&gate_by_depth(&before, &frame.depth, frame.depth_threshold).unwrap());
    let ha = column_histogram(&gate_by_depth(&after, &frame.depth, frame.depth_threshold).unwrap());
    for (b, a) in hb.values().iter().zip(ha.values()) {
        prop_assert!(a >= b);
    }
    Ok(())
}
