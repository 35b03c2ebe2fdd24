use std::collections::BTreeMap;

use super::EvalError;
use crate::label::Label;
use crate::pipeline::{Challenge, Claim};

fn sort_key(seed: u64, id: &str) -> String {
    crate::digest::sha256_hex(format!("{seed}\0{id}").as_bytes())
}

/// Draws `n` claims with a balanced label split.
///
/// Each class is ordered by `sha256(seed, id)` and the first ⌈n/2⌉ supported
/// and ⌊n/2⌋ not-supported claims are taken. If the supported class is one
/// short, the extra slot goes to the other class. Unlabeled claims are
/// ignored. The result keeps input order.
pub fn stratified_sample(claims: &[Claim], n: usize, seed: u64) -> Result<Vec<Claim>, EvalError> {
    let mut classes: [(Label, Vec<(String, usize)>); 2] = [(Label::Supported, Vec::new()), (Label::NotSupported, Vec::new())];
    for (i, c) in claims.iter().enumerate() {
        match c.gold_label.as_label() {
            Some(Label::Supported) => classes[0].1.push((sort_key(seed, &c.id), i)),
            Some(Label::NotSupported) => classes[1].1.push((sort_key(seed, &c.id), i)),
            _ => {}
        }
    }
    let (mut want_s, mut want_n) = (n.div_ceil(2), n / 2);
    if classes[0].1.len() < want_s && n % 2 == 1 && classes[1].1.len() > want_n {
        want_s -= 1;
        want_n += 1;
    }
    let mut chosen = Vec::with_capacity(n);
    for ((label, members), want) in classes.iter_mut().zip([want_s, want_n]) {
        if members.len() < want {
            return Err(EvalError::InsufficientClass {
                label: *label,
                needed: want,
                available: members.len(),
            });
        }
        members.sort();
        chosen.extend(members.iter().take(want).map(|(_, i)| *i));
    }
    chosen.sort_unstable();
    Ok(chosen.into_iter().map(|i| claims[i].clone()).collect())
}

/// Applies [`stratified_sample`] to each challenge group separately; groups
/// come out in challenge order.
pub fn stratified_sample_per_challenge(claims: &[Claim], n: usize, seed: u64) -> Result<Vec<Claim>, EvalError> {
    let mut groups: BTreeMap<Challenge, Vec<Claim>> = BTreeMap::new();
    for c in claims {
        groups.entry(c.challenge).or_default().push(c.clone());
    }
    let mut out = Vec::new();
    for members in groups.values() {
        out.extend(stratified_sample(members, n, seed)?);
    }
    Ok(out)
}
