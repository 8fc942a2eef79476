//! Learning-rate and INQ-fraction schedules for one 30-epoch module stage.

use serde::{Deserialize, Serialize};

/// Epoch count the published tables are written for.
pub const TABLE_EPOCHS: usize = 30;

/// From `epoch` on, lr = base·`gamma`; INQ entries also raise the frozen
/// fraction to `fraction`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub epoch: usize,
    pub gamma: f64,
    pub fraction: Option<f64>,
}

fn entry(epoch: usize, gamma: f64, fraction: Option<f64>) -> ScheduleEntry {
    ScheduleEntry {
        epoch,
        gamma,
        fraction,
    }
}

/// The 16-entry INQ table: γ=1 with a fraction step at 0,5,…,29 and γ=0.1
/// at 3,7,…,27 and 30.
pub fn inq_schedule() -> Vec<ScheduleEntry> {
    const STEPS: [(usize, f64); 8] = [
        (0, 0.2),
        (5, 0.4),
        (9, 0.6),
        (13, 0.8),
        (17, 0.9),
        (21, 0.95),
        (25, 0.975),
        (29, 1.0),
    ];
    const DECAYS: [usize; 8] = [3, 7, 11, 15, 19, 23, 27, 30];
    let mut out: Vec<ScheduleEntry> = STEPS
        .iter()
        .map(|&(e, f)| entry(e, 1.0, Some(f)))
        .chain(DECAYS.iter().map(|&e| entry(e, 0.1, None)))
        .collect();
    out.sort_by_key(|e| e.epoch);
    out
}

/// Multi-step decay by 10 at epochs 10, 20 and 25.
pub fn lsq_schedule() -> Vec<ScheduleEntry> {
    vec![
        entry(0, 1.0, None),
        entry(10, 0.1, None),
        entry(20, 0.01, None),
        entry(25, 0.001, None),
    ]
}

/// Maps a 30-epoch table onto `epochs` epochs: entry epoch `e` moves to
/// `⌊e·epochs/30⌋`. Order is kept, so on collisions the later table entry
/// wins. The identity for `epochs == 30`.
pub fn scale_schedule(table: &[ScheduleEntry], epochs: usize) -> Vec<ScheduleEntry> {
    table
        .iter()
        .map(|e| ScheduleEntry {
            epoch: e.epoch * epochs / TABLE_EPOCHS,
            ..*e
        })
        .collect()
}

/// lr multiplier in effect during `epoch`.
pub fn gamma_at(schedule: &[ScheduleEntry], epoch: usize) -> f64 {
    schedule
        .iter()
        .rfind(|e| e.epoch <= epoch)
        .map_or(1.0, |e| e.gamma)
}

/// Highest fraction scheduled at or before `epoch`, if any.
pub fn fraction_at(schedule: &[ScheduleEntry], epoch: usize) -> Option<f64> {
    schedule
        .iter()
        .filter(|e| e.epoch <= epoch)
        .filter_map(|e| e.fraction)
        .fold(None, |m: Option<f64>, f| Some(m.map_or(f, |m| m.max(f))))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inq_first_and_last_fraction() {
        let s = inq_schedule();
        assert_eq!(s.len(), 16);
        assert_eq!(s[0], entry(0, 1.0, Some(0.2)));
        assert_eq!(fraction_at(&s, 29), Some(1.0));
        assert_eq!(fraction_at(&s, 28), Some(0.975));
    }

    #[test]
    fn inq_gamma_resets_at_fraction_steps() {
        let s = inq_schedule();
        let g: Vec<f64> = (0..31).map(|e| gamma_at(&s, e)).collect();
        assert_eq!(&g[..6], &[1.0, 1.0, 1.0, 0.1, 0.1, 1.0]);
        assert_eq!(g[29], 1.0);
        assert_eq!(g[30], 0.1);
    }

    #[test]
    fn lsq_decays() {
        let s = lsq_schedule();
        assert_eq!(gamma_at(&s, 9), 1.0);
        assert_eq!(gamma_at(&s, 10), 0.1);
        assert_eq!(gamma_at(&s, 26), 0.001);
        assert!(s.iter().all(|e| e.fraction.is_none()));
    }

    #[test]
    fn scaled_schedule_completes_before_last_epoch() {
        for epochs in 1..=40 {
            let s = scale_schedule(&inq_schedule(), epochs);
            assert_eq!(fraction_at(&s, epochs - 1), Some(1.0), "epochs {epochs}");
        }
        assert_eq!(scale_schedule(&inq_schedule(), 30), inq_schedule());
    }
}
