//! Relocation schemes: the control loops that drive a priority function
//! over a bay until every container has been retrieved.
//!
//! The restricted scheme only ever moves containers stacked above the
//! current target. The unrestricted scheme additionally clears the chosen
//! destination's top containers onto stacks where they block nobody before
//! the blocker lands. Both emit the full move trace, including empty crane
//! repositioning between picks when the kinematics configuration asks for
//! it, and both break score ties toward the lowest stack index.

use std::io::{self, Write};

use thiserror::Error;

use crate::energy::{episode_energy, move_energy, EnergyParams, KinematicsConfig};
use crate::features::compute_features;
use crate::priority::{PriorityFunction, ScoreContext};
use crate::yard::{Bay, Move, MoveKind, Slot, YardError};

/// Which relocation scheme drives the episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Restricted,
    Unrestricted,
}

impl Scheme {
    pub fn label(self) -> &'static str {
        match self {
            Scheme::Restricted => "restricted",
            Scheme::Unrestricted => "unrestricted",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "restricted" => Ok(Scheme::Restricted),
            "unrestricted" => Ok(Scheme::Unrestricted),
            other => Err(format!("unknown scheme `{other}`")),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchemeError {
    #[error("deadlock: no legal destination when relocating from stack {origin}")]
    Deadlock { origin: usize },
    #[error("relocation budget of {budget} exceeded; the episode cannot terminate")]
    BudgetExceeded { budget: usize },
    #[error(transparent)]
    Yard(#[from] YardError),
}

/// A completed retrieval episode: the move trace and its total energy.
#[derive(Debug, Clone)]
pub struct Episode {
    pub moves: Vec<Move>,
    pub total_energy: f64,
}

impl Episode {
    pub fn relocations(&self) -> usize {
        self.count(MoveKind::Relocate)
    }

    pub fn retrievals(&self) -> usize {
        self.count(MoveKind::Retrieve)
    }

    fn count(&self, kind: MoveKind) -> usize {
        self.moves.iter().filter(|m| m.kind == kind).count()
    }
}

/// Run one episode under the given scheme.
pub fn run_scheme<P: PriorityFunction + ?Sized>(
    scheme: Scheme,
    bay: Bay,
    pf: &P,
    params: &EnergyParams,
    kin: &KinematicsConfig,
) -> Result<Episode, SchemeError> {
    match scheme {
        Scheme::Restricted => run_restricted(bay, pf, params, kin),
        Scheme::Unrestricted => run_unrestricted(bay, pf, params, kin),
    }
}

struct Driver<'a, P: ?Sized> {
    bay: Bay,
    pf: &'a P,
    kin: &'a KinematicsConfig,
    moves: Vec<Move>,
    max_weight: f64,
    relocations: usize,
    budget: usize,
}

impl<'a, P: PriorityFunction + ?Sized> Driver<'a, P> {
    fn new(mut bay: Bay, pf: &'a P, kin: &'a KinematicsConfig, budget: usize) -> Self {
        bay.set_crane(kin.initial_crane_position);
        let max_weight = bay.max_weight().unwrap_or(1.0);
        Driver {
            bay,
            pf,
            kin,
            moves: Vec::new(),
            max_weight,
            relocations: 0,
            budget,
        }
    }

    /// Emit the empty travel leg from the crane's position to the pickup
    /// slot. Zero-displacement legs are dropped from the trace.
    fn approach(&mut self, pickup: Slot) {
        if self.kin.count_empty_moves && self.bay.crane_at() != pickup {
            self.moves
                .push(Move::empty_reposition(self.bay.crane_at(), pickup));
        }
    }

    /// Lowest-scoring legal destination for the top of `origin`; ties go to
    /// the lowest stack index. `None` when every other stack is full.
    fn choose_destination(&self, origin: usize) -> Option<usize> {
        let container = self.bay.top(origin)?;
        let mut best: Option<(usize, f64)> = None;
        for dest in self.bay.legal_destinations(origin) {
            let features = compute_features(&self.bay, container, origin, dest)
                .expect("legal destination");
            let ctx = ScoreContext {
                bay: &self.bay,
                features,
                container,
                origin,
                dest,
                max_weight: self.max_weight,
            };
            let score = self.pf.score(&ctx);
            if best.is_none_or(|(_, s)| score < s) {
                best = Some((dest, score));
            }
        }
        best.map(|(dest, _)| dest)
    }

    fn relocate(&mut self, origin: usize, dest: usize) -> Result<(), SchemeError> {
        if self.relocations >= self.budget {
            return Err(SchemeError::BudgetExceeded {
                budget: self.budget,
            });
        }
        let pickup = Slot::new(origin, self.bay.height(origin));
        self.approach(pickup);
        self.moves.push(self.bay.apply_relocate(origin, dest)?);
        self.relocations += 1;
        Ok(())
    }

    fn retrieve(&mut self) -> Result<(), SchemeError> {
        let stack = self.bay.target_stack().expect("bay is non-empty");
        let pickup = Slot::new(stack, self.bay.height(stack));
        self.approach(pickup);
        self.moves.push(self.bay.apply_retrieve(self.kin.truck_tier)?);
        Ok(())
    }

    /// Relocate the blocker on top of the target's stack, after any
    /// unrestricted pre-relocations of the destination's top containers.
    fn clear_one_blocker(&mut self, target_stack: usize, scheme: Scheme) -> Result<(), SchemeError> {
        let dest = self
            .choose_destination(target_stack)
            .ok_or(SchemeError::Deadlock {
                origin: target_stack,
            })?;
        if scheme == Scheme::Unrestricted {
            // Move the destination's top container to a stack whose minimum
            // id exceeds it (so it can never block there), while one exists.
            while let Some(dest_top) = self.bay.top(dest) {
                let clean = (1..=self.bay.stack_count()).find(|&s| {
                    self.bay.height(s) < self.bay.max_height()
                        && self.bay.min_id_in(s).is_none_or(|m| m > dest_top.id)
                });
                match clean {
                    Some(s1) => self.relocate(dest, s1)?,
                    None => break,
                }
            }
        }
        self.relocate(target_stack, dest)
    }

    fn run(mut self, scheme: Scheme, params: &EnergyParams) -> Result<Episode, SchemeError> {
        while let Some(target) = self.bay.target_container() {
            let stack = self.bay.target_stack().expect("target exists");
            while self.bay.top(stack).map(|c| c.id) != Some(target) {
                self.clear_one_blocker(stack, scheme)?;
            }
            self.retrieve()?;
        }
        let total_energy = episode_energy(&self.moves, params);
        Ok(Episode {
            moves: self.moves,
            total_energy,
        })
    }
}

fn relocation_budget(bay: &Bay, scheme: Scheme) -> usize {
    let c = bay.container_count().max(1);
    let base = c * bay.max_height().max(1) * bay.stack_count().max(1);
    match scheme {
        Scheme::Restricted => base,
        // Each blocker relocation may be preceded by up to H pre-relocations.
        Scheme::Unrestricted => base * (bay.max_height() + 1),
    }
}

/// Restricted scheme: repeatedly relocate the container on top of the
/// target's stack to the best-scoring legal destination, then retrieve.
pub fn run_restricted<P: PriorityFunction + ?Sized>(
    bay: Bay,
    pf: &P,
    params: &EnergyParams,
    kin: &KinematicsConfig,
) -> Result<Episode, SchemeError> {
    let budget = relocation_budget(&bay, Scheme::Restricted);
    Driver::new(bay, pf, kin, budget).run(Scheme::Restricted, params)
}

/// Unrestricted scheme: like the restricted one, but before a blocker lands
/// on its chosen destination, the destination's top containers are moved to
/// stacks where they block nobody, for as long as such stacks exist.
pub fn run_unrestricted<P: PriorityFunction + ?Sized>(
    bay: Bay,
    pf: &P,
    params: &EnergyParams,
    kin: &KinematicsConfig,
) -> Result<Episode, SchemeError> {
    let budget = relocation_budget(&bay, Scheme::Unrestricted);
    Driver::new(bay, pf, kin, budget).run(Scheme::Unrestricted, params)
}

/// Write a trace as one move per line:
/// `kind from_stack from_tier to_stack to_tier container_id energy`,
/// with `-` for the container of empty repositioning moves.
pub fn write_trace(moves: &[Move], params: &EnergyParams, out: &mut impl Write) -> io::Result<()> {
    for m in moves {
        let id = m
            .container_id
            .map_or_else(|| "-".to_string(), |id| id.to_string());
        writeln!(
            out,
            "{} {} {} {} {} {} {}",
            m.kind.label(),
            m.from.stack,
            m.from.tier,
            m.to.stack,
            m.to.tier,
            id,
            move_energy(m, params)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::priority::LowestStack;
    use crate::yard::{bay_from_ids, Container};
    use approx::assert_relative_eq;

    fn defaults() -> (EnergyParams, KinematicsConfig) {
        (EnergyParams::default(), KinematicsConfig::default())
    }

    #[test]
    fn single_stack_needs_no_relocations() {
        let (p, k) = defaults();
        let bay = bay_from_ids(&[&[3, 2, 1]], 4);
        let ep = run_restricted(bay, &LowestStack, &p, &k).unwrap();
        assert_eq!(ep.relocations(), 0);
        assert_eq!(ep.retrievals(), 3);
    }

    #[test]
    fn restricted_hand_trace() {
        // stack1 = [2, 3] bottom-to-top, stack2 empty:
        // relocate 3 -> stack2, retrieve 2, retrieve 3.
        let (p, k) = defaults();
        let bay = bay_from_ids(&[&[2, 3], &[]], 4);
        let ep = run_restricted(bay, &LowestStack, &p, &k).unwrap();
        let loaded: Vec<(MoveKind, u32)> = ep
            .moves
            .iter()
            .filter(|m| m.kind != MoveKind::EmptyReposition)
            .map(|m| (m.kind, m.container_id.unwrap()))
            .collect();
        assert_eq!(
            loaded,
            vec![
                (MoveKind::Relocate, 3),
                (MoveKind::Retrieve, 2),
                (MoveKind::Retrieve, 3),
            ]
        );
    }

    #[test]
    fn hand_traced_energy_total() {
        // One blocker, two retrievals, empty moves interleaved; weights
        // w1 = 10, w2 = 20; defaults; crane starts at the truck (0, 1).
        //
        //   empty   (0,1)->(1,2): 0.5  * (0.9*1 + 0.08*1) = 0.49
        //   relocate(1,2)->(2,1): 20.5 * (0.02*1 + 0.08*1) = 2.05
        //   empty   (2,1)->(1,1): 0.5  * (0.08*1)          = 0.04
        //   retrieve(1,1)->(0,1): 10.5 * (0.08*1)          = 0.84
        //   empty   (0,1)->(2,1): 0.5  * (0.08*2)          = 0.08
        //   retrieve(2,1)->(0,1): 20.5 * (0.08*2)          = 3.28
        let (p, k) = defaults();
        let bay = crate::yard::Bay::new(
            vec![
                vec![Container::new(1, 10.0), Container::new(2, 20.0)],
                vec![],
            ],
            3,
            Slot::new(0, 1),
        )
        .unwrap();
        let ep = run_restricted(bay, &LowestStack, &p, &k).unwrap();
        assert_eq!(ep.moves.len(), 6);
        assert_relative_eq!(ep.total_energy, 6.78, max_relative = 1e-12);
    }

    #[test]
    fn empty_moves_can_be_disabled() {
        let p = EnergyParams::default();
        let k = KinematicsConfig {
            count_empty_moves: false,
            ..KinematicsConfig::default()
        };
        let bay = crate::yard::Bay::new(
            vec![
                vec![Container::new(1, 10.0), Container::new(2, 20.0)],
                vec![],
            ],
            3,
            Slot::new(0, 1),
        )
        .unwrap();
        let ep = run_restricted(bay, &LowestStack, &p, &k).unwrap();
        assert_eq!(ep.moves.len(), 3);
        assert_relative_eq!(ep.total_energy, 2.05 + 0.84 + 3.28, max_relative = 1e-12);
    }

    #[test]
    fn deadlock_when_all_other_stacks_full() {
        let (p, k) = defaults();
        // Target 1 is buried and the only other stack is full.
        let bay = bay_from_ids(&[&[1, 4], &[2, 3]], 2);
        let err = run_restricted(bay, &LowestStack, &p, &k).unwrap_err();
        assert_eq!(err, SchemeError::Deadlock { origin: 1 });
    }

    #[test]
    fn full_episode_retrieves_everything_in_order() {
        let (p, k) = defaults();
        let bay = bay_from_ids(&[&[9, 1, 5], &[2, 8], &[7, 3], &[]], 4);
        let count = bay.container_count();
        for scheme in [Scheme::Restricted, Scheme::Unrestricted] {
            let ep = run_scheme(scheme, bay.clone(), &LowestStack, &p, &k).unwrap();
            assert_eq!(ep.retrievals(), count);
            let retrieved: Vec<u32> = ep
                .moves
                .iter()
                .filter(|m| m.kind == MoveKind::Retrieve)
                .map(|m| m.container_id.unwrap())
                .collect();
            let mut sorted = retrieved.clone();
            sorted.sort_unstable();
            assert_eq!(retrieved, sorted, "{scheme:?} retrieved out of order");
        }
    }

    #[test]
    fn unrestricted_empty_destination_behaves_like_restricted() {
        let (p, k) = defaults();
        // Single blocker, empty second stack: the inner loop never fires.
        let bay = bay_from_ids(&[&[1, 2], &[]], 3);
        let restricted = run_restricted(bay.clone(), &LowestStack, &p, &k).unwrap();
        let unrestricted = run_unrestricted(bay, &LowestStack, &p, &k).unwrap();
        assert_eq!(restricted.moves, unrestricted.moves);
    }

    #[test]
    fn unrestricted_pre_relocates_destination_top() {
        // Target 1 under blocker 7; destinations: stack2 = [4], stack3 = [9].
        // TLP ties 2 and 3 -> picks stack2 (lowest index). Stack3 has
        // min id 9 > 4, so 4 is pre-relocated there before 7 lands.
        let (p, k) = defaults();
        let bay = bay_from_ids(&[&[1, 7], &[4], &[9]], 3);
        let ep = run_unrestricted(bay, &LowestStack, &p, &k).unwrap();
        let relocs: Vec<(u32, usize, usize)> = ep
            .moves
            .iter()
            .filter(|m| m.kind == MoveKind::Relocate)
            .map(|m| (m.container_id.unwrap(), m.from.stack, m.to.stack))
            .collect();
        assert_eq!(relocs[0], (4, 2, 3), "clean move first");
        assert_eq!(relocs[1], (7, 1, 2), "blocker lands on cleared stack");
    }

    #[test]
    fn trace_format_golden() {
        let (p, k) = defaults();
        let bay = crate::yard::Bay::new(
            vec![
                vec![Container::new(1, 10.0), Container::new(2, 20.0)],
                vec![],
            ],
            3,
            Slot::new(0, 1),
        )
        .unwrap();
        let ep = run_restricted(bay, &LowestStack, &p, &k).unwrap();
        let mut buf = Vec::new();
        write_trace(&ep.moves, &p, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let expected_prefixes = [
            "empty 0 1 1 2 -",
            "relocate 1 2 2 1 2",
            "empty 2 1 1 1 -",
            "retrieve 1 1 0 1 1",
            "empty 0 1 2 1 -",
            "retrieve 2 1 0 1 2",
        ];
        let expected_energy = [0.49, 2.05, 0.04, 0.84, 0.08, 3.28];
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 6);
        for ((line, prefix), energy) in lines.iter().zip(expected_prefixes).zip(expected_energy) {
            let (head, tail) = line.rsplit_once(' ').unwrap();
            assert_eq!(head, prefix);
            assert_relative_eq!(tail.parse::<f64>().unwrap(), energy, max_relative = 1e-12);
        }
    }
}
