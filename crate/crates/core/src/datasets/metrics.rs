use crate::error::{invalid, Result};

fn check_pair(y_true: &[usize], y_pred: &[usize]) -> Result<()> {
    if y_true.len() != y_pred.len() {
        return Err(invalid("label vectors differ in length"));
    }
    if y_true.is_empty() {
        return Err(invalid("metrics need at least one sample"));
    }
    Ok(())
}

pub fn accuracy(y_true: &[usize], y_pred: &[usize]) -> Result<f64> {
    check_pair(y_true, y_pred)?;
    let hits = y_true.iter().zip(y_pred).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / y_true.len() as f64)
}

/// Micro-averaged F1; for single-label multi-class data this is accuracy.
pub fn micro_f1(y_true: &[usize], y_pred: &[usize]) -> Result<f64> {
    check_pair(y_true, y_pred)?;
    let n_classes = y_true.iter().chain(y_pred).max().map_or(0, |m| m + 1);
    let (mut tp, mut fp, mut f_n) = (0usize, 0usize, 0usize);
    for class in 0..n_classes {
        for (&t, &p) in y_true.iter().zip(y_pred) {
            match (t == class, p == class) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (true, false) => f_n += 1,
                _ => {}
            }
        }
    }
    Ok(f1(tp, fp, f_n))
}

fn f1(tp: usize, fp: usize, f_n: usize) -> f64 {
    let denom = 2 * tp + fp + f_n;
    if denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

/// Unweighted mean of per-class F1 over classes occurring in either vector.
pub fn macro_f1(y_true: &[usize], y_pred: &[usize]) -> Result<f64> {
    check_pair(y_true, y_pred)?;
    let n_classes = y_true.iter().chain(y_pred).max().map_or(0, |m| m + 1);
    let mut sum = 0.0;
    let mut present = 0;
    for class in 0..n_classes {
        let (mut tp, mut fp, mut f_n) = (0, 0, 0);
        for (&t, &p) in y_true.iter().zip(y_pred) {
            match (t == class, p == class) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (true, false) => f_n += 1,
                _ => {}
            }
        }
        if tp + fp + f_n > 0 {
            sum += f1(tp, fp, f_n);
            present += 1;
        }
    }
    Ok(sum / present as f64)
}

/// Area under the precision-recall curve as the step-wise sum
/// `sum_k (R_k - R_{k-1}) P_k` over descending distinct score thresholds.
pub fn aupr(y_true: &[bool], scores: &[f64]) -> Result<f64> {
    if y_true.len() != scores.len() {
        return Err(invalid("labels and scores differ in length"));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(invalid("scores must be finite"));
    }
    let n_pos = y_true.iter().filter(|&&y| y).count();
    if n_pos == 0 || n_pos == y_true.len() {
        return Err(invalid("AUPR needs both positive and negative samples"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let (mut tp, mut seen) = (0usize, 0usize);
    let mut prev_recall = 0.0;
    let mut area = 0.0;
    let mut k = 0;
    while k < order.len() {
        let s = scores[order[k]];
        while k < order.len() && scores[order[k]] == s {
            tp += usize::from(y_true[order[k]]);
            seen += 1;
            k += 1;
        }
        let recall = tp as f64 / n_pos as f64;
        let precision = tp as f64 / seen as f64;
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Ok(area)
}
