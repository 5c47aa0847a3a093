//! The individual contributions to `E{w_{k,i} w_{k,i}ᴴ}`, each defined as the
//! moment obtained when only a subset of channel components (and possibly the
//! pilot noise) is kept, with the estimator held fixed. Every family is thus
//! directly comparable with a masked Monte-Carlo run.

use crate::channel::{ChannelStatistics, ComponentMask, PhaseConfig, UserComponents};
use crate::closed_form::MomentEngine;
use crate::error::{invalid, Result};
use crate::estimation::{LmmseOperator, PilotAssignment};
use crate::linalg::CMatrix;
use crate::scalar::{Cx, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TermFamily {
    /// Direct links and pilot noise only.
    Direct,
    /// RIS-cascaded components of the estimated and target users.
    CrossBs,
    /// RIS-cascaded components of the co-pilot users and the target.
    PcCrossBs,
    /// Interference from another user, all channel components, noiseless pilots.
    CrossUser,
    /// Pilot noise projected on the target channel.
    Noise,
    /// A user's own channel, noiseless pilots.
    SelfUe,
    /// Increment of the own-channel moment caused by co-pilot users.
    PcSelfUe,
}

/// Mask selecting a family; when `subtract` is set the family is the difference
/// of the two masked moments.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TermMasks {
    pub keep: ComponentMask,
    pub subtract: Option<ComponentMask>,
}

impl TermFamily {
    pub const ALL: [TermFamily; 7] = [
        TermFamily::Direct,
        TermFamily::CrossBs,
        TermFamily::PcCrossBs,
        TermFamily::CrossUser,
        TermFamily::Noise,
        TermFamily::SelfUe,
        TermFamily::PcSelfUe,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            TermFamily::Direct => "C",
            TermFamily::CrossBs => "CROSS-BS",
            TermFamily::PcCrossBs => "PC-CROSS-BS",
            TermFamily::CrossUser => "CROSS-USER",
            TermFamily::Noise => "NOISE",
            TermFamily::SelfUe => "SELF-UE",
            TermFamily::PcSelfUe => "PC-SELF-UE",
        }
    }

    pub fn masks(&self, assignment: &PilotAssignment, k: usize, i: usize) -> Result<TermMasks> {
        let kn = assignment.num_users();
        if k >= kn || i >= kn {
            return invalid(format!("users ({k}, {i}) out of range for K = {kn}"));
        }
        let none = ComponentMask::none(kn);
        let keep = match self {
            TermFamily::Direct => {
                let mut m = none.with_noise(true);
                for &l in assignment.copilots[k].iter().chain([i].iter()) {
                    m = m.with(l, UserComponents::DIRECT_ONLY);
                }
                m
            }
            TermFamily::CrossBs => none.with(k, UserComponents::RIS_ONLY).with(i, UserComponents::RIS_ONLY),
            TermFamily::PcCrossBs => {
                if i == k {
                    return invalid("PC-CROSS-BS needs a target other than the estimated user");
                }
                let mut m = none;
                for l in assignment.others(k) {
                    m = m.with(l, UserComponents::RIS_ONLY);
                }
                m.with(i, UserComponents::RIS_ONLY)
            }
            TermFamily::CrossUser => {
                if i == k {
                    return invalid("CROSS-USER needs i != k");
                }
                none.with(k, UserComponents::ALL).with(i, UserComponents::ALL)
            }
            TermFamily::Noise => none.with_noise(true).with(i, UserComponents::ALL),
            TermFamily::SelfUe | TermFamily::PcSelfUe => {
                if i != k {
                    return invalid(format!("{} needs i == k", self.name()));
                }
                none.with(k, UserComponents::ALL)
            }
        };
        if *self == TermFamily::PcSelfUe {
            let mut with_pc = keep.clone();
            for l in assignment.others(k) {
                with_pc = with_pc.with(l, UserComponents::ALL);
            }
            return Ok(TermMasks {
                keep: with_pc,
                subtract: Some(keep),
            });
        }
        Ok(TermMasks { keep, subtract: None })
    }
}

/// The J×J matrix of one family for the pair `(k, i)`.
pub fn term_matrix<T: Real>(
    family: TermFamily,
    stats: &ChannelStatistics<T>,
    operator: &LmmseOperator<T>,
    phase: &PhaseConfig<T>,
    assignment: &PilotAssignment,
    k: usize,
    i: usize,
) -> Result<CMatrix<T>> {
    let masks = family.masks(assignment, k, i)?;
    let eval = |m: &ComponentMask| {
        MomentEngine::new(stats, operator, phase, assignment, Some(m))
            .pair(k, i)
            .second
    };
    let mut out = eval(&masks.keep);
    if let Some(sub) = &masks.subtract {
        out = &out - &eval(sub);
    }
    Ok(out)
}

fn entry<T: Real>(
    family: TermFamily,
    stats: &ChannelStatistics<T>,
    operator: &LmmseOperator<T>,
    phase: &PhaseConfig<T>,
    assignment: &PilotAssignment,
    (k, i, j, h): (usize, usize, usize, usize),
) -> Result<Cx<T>> {
    let d = stats.dims.num_aps;
    if j >= d || h >= d {
        return invalid(format!("AP indices ({j}, {h}) out of range for J = {d}"));
    }
    Ok(term_matrix(family, stats, operator, phase, assignment, k, i)?[(j, h)])
}

/// `(j, h)` entry of the CROSS-BS family.
pub fn term_cross_bs<T: Real>(
    stats: &ChannelStatistics<T>,
    operator: &LmmseOperator<T>,
    phase: &PhaseConfig<T>,
    assignment: &PilotAssignment,
    k: usize,
    i: usize,
    j: usize,
    h: usize,
) -> Result<Cx<T>> {
    entry(TermFamily::CrossBs, stats, operator, phase, assignment, (k, i, j, h))
}

pub fn term_pc_cross_bs<T: Real>(
    stats: &ChannelStatistics<T>,
    operator: &LmmseOperator<T>,
    phase: &PhaseConfig<T>,
    assignment: &PilotAssignment,
    k: usize,
    i: usize,
    j: usize,
    h: usize,
) -> Result<Cx<T>> {
    entry(TermFamily::PcCrossBs, stats, operator, phase, assignment, (k, i, j, h))
}

/// Diagonal CROSS-USER entry at AP `j`.
pub fn term_cross_user<T: Real>(
    stats: &ChannelStatistics<T>,
    operator: &LmmseOperator<T>,
    phase: &PhaseConfig<T>,
    assignment: &PilotAssignment,
    k: usize,
    i: usize,
    j: usize,
) -> Result<Cx<T>> {
    entry(TermFamily::CrossUser, stats, operator, phase, assignment, (k, i, j, j))
}

/// Diagonal NOISE entry at AP `j`.
pub fn term_noise<T: Real>(
    stats: &ChannelStatistics<T>,
    operator: &LmmseOperator<T>,
    phase: &PhaseConfig<T>,
    assignment: &PilotAssignment,
    k: usize,
    i: usize,
    j: usize,
) -> Result<Cx<T>> {
    entry(TermFamily::Noise, stats, operator, phase, assignment, (k, i, j, j))
}

pub fn term_self_ue<T: Real>(
    stats: &ChannelStatistics<T>,
    operator: &LmmseOperator<T>,
    phase: &PhaseConfig<T>,
    assignment: &PilotAssignment,
    k: usize,
    j: usize,
    h: usize,
) -> Result<Cx<T>> {
    entry(TermFamily::SelfUe, stats, operator, phase, assignment, (k, k, j, h))
}

pub fn term_pc_self_ue<T: Real>(
    stats: &ChannelStatistics<T>,
    operator: &LmmseOperator<T>,
    phase: &PhaseConfig<T>,
    assignment: &PilotAssignment,
    k: usize,
    j: usize,
    h: usize,
) -> Result<Cx<T>> {
    entry(TermFamily::PcSelfUe, stats, operator, phase, assignment, (k, k, j, h))
}

/// Diagonal C entry at AP `j`.
pub fn term_direct<T: Real>(
    stats: &ChannelStatistics<T>,
    operator: &LmmseOperator<T>,
    phase: &PhaseConfig<T>,
    assignment: &PilotAssignment,
    k: usize,
    i: usize,
    j: usize,
) -> Result<Cx<T>> {
    entry(TermFamily::Direct, stats, operator, phase, assignment, (k, i, j, j))
}
