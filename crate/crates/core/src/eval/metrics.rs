use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::label::Label;

/// Binary confusion counts. Unknown predictions are tallied separately and
/// also count as misses for their gold class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    /// gold SUPPORTED, predicted SUPPORTED
    pub ss: usize,
    /// gold SUPPORTED, predicted NOT_SUPPORTED
    pub sn: usize,
    /// gold SUPPORTED, predicted Unknown
    pub su: usize,
    pub ns: usize,
    pub nn: usize,
    pub nu: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.ss + self.sn + self.su + self.ns + self.nn + self.nu
    }

    pub fn unknown(&self) -> usize {
        self.su + self.nu
    }
}

fn check(pred: &[Label], gold: &[Label]) -> Result<(), EvalError> {
    if pred.len() != gold.len() {
        return Err(EvalError::LengthMismatch {
            pred: pred.len(),
            gold: gold.len(),
        });
    }
    match gold.iter().position(|g| !g.is_determinate()) {
        Some(i) => Err(EvalError::InvalidGold(i)),
        None => Ok(()),
    }
}

pub fn confusion(pred: &[Label], gold: &[Label]) -> Result<Confusion, EvalError> {
    check(pred, gold)?;
    let mut c = Confusion::default();
    for (p, g) in pred.iter().zip(gold) {
        let cell = match (g, p) {
            (Label::Supported, Label::Supported) => &mut c.ss,
            (Label::Supported, Label::NotSupported) => &mut c.sn,
            (Label::Supported, Label::Unknown) => &mut c.su,
            (_, Label::Supported) => &mut c.ns,
            (_, Label::NotSupported) => &mut c.nn,
            (_, Label::Unknown) => &mut c.nu,
        };
        *cell += 1;
    }
    Ok(c)
}

/// F1 of each verdict class, `None` for a class that is absent from gold and
/// never predicted.
pub fn per_class_f1(c: &Confusion) -> [(Label, Option<f64>); 2] {
    let f1 = |tp: usize, fp: usize, fn_: usize| -> Option<f64> {
        if tp + fp + fn_ == 0 {
            None
        } else {
            Some(2.0 * tp as f64 / (2 * tp + fp + fn_) as f64)
        }
    };
    [
        (Label::Supported, f1(c.ss, c.ns, c.sn + c.su)),
        (Label::NotSupported, f1(c.nn, c.sn, c.ns + c.nu)),
    ]
}

/// Unweighted mean of the per-class F1 over SUPPORTED and NOT_SUPPORTED.
///
/// Unknown predictions form no class; they are false negatives of their gold
/// class. A class missing from gold counts (as 0) only if it was predicted.
/// Empty input scores 0.
pub fn macro_f1(pred: &[Label], gold: &[Label]) -> Result<f64, EvalError> {
    let c = confusion(pred, gold)?;
    let scores: Vec<f64> = per_class_f1(&c).iter().filter_map(|(_, f)| *f).collect();
    if scores.is_empty() {
        return Ok(0.0);
    }
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use Label::{NotSupported as N, Supported as S, Unknown as U};

    #[test]
    fn simple_cases() {
        assert_eq!(macro_f1(&[S, N, S], &[S, N, S]).unwrap(), 1.0);
        assert_eq!(macro_f1(&[N, N, S, S], &[S, S, N, N]).unwrap(), 0.0);
        assert_eq!(macro_f1(&[], &[]).unwrap(), 0.0);
        assert!(matches!(macro_f1(&[S], &[]), Err(EvalError::LengthMismatch { pred: 1, gold: 0 })));
        assert!(matches!(macro_f1(&[S], &[U]), Err(EvalError::InvalidGold(0))));
    }

    #[test]
    fn worked_example_value() {
        // S: tp 2, fp 0, fn 1 -> 0.8; N: tp 2, fp 1, fn 0 -> 0.8
        let v = macro_f1(&[S, S, N, N, N], &[S, S, S, N, N]).unwrap();
        assert!((v - 0.8).abs() < 1e-12, "{v}");
    }

    #[test]
    fn unknown_is_a_miss() {
        // all-unknown predictions score zero on both classes
        assert_eq!(macro_f1(&[U, U], &[S, N]).unwrap(), 0.0);
        // one class absent from gold and never predicted is excluded
        assert_eq!(macro_f1(&[S, S], &[S, S]).unwrap(), 1.0);
        assert_eq!(macro_f1(&[S, U], &[S, S]).unwrap(), 2.0 / 3.0);
        // absent from gold but predicted counts as 0
        assert_eq!(macro_f1(&[S, N], &[S, S]).unwrap(), (2.0 / 3.0) / 2.0);
        let c = confusion(&[U, S, U], &[S, N, N]).unwrap();
        assert_eq!((c.unknown(), c.total()), (2, 3));
    }

    fn arb_pair() -> impl Strategy<Value = (Vec<Label>, Vec<Label>)> {
        (0usize..12).prop_flat_map(|n| {
            (
                prop::collection::vec(prop_oneof![Just(S), Just(N), Just(U)], n),
                prop::collection::vec(prop_oneof![Just(S), Just(N)], n),
            )
        })
    }

    fn swap(l: Label) -> Label {
        match l {
            S => N,
            N => S,
            U => U,
        }
    }

    proptest! {
        #[test]
        fn symmetric_under_relabeling((pred, gold) in arb_pair()) {
            let a = macro_f1(&pred, &gold).unwrap();
            let sp: Vec<Label> = pred.iter().copied().map(swap).collect();
            let sg: Vec<Label> = gold.iter().copied().map(swap).collect();
            prop_assert!((a - macro_f1(&sp, &sg).unwrap()).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&a));
        }
    }
}
