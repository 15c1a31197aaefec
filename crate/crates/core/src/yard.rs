//! Single-bay container yard: stacks of prioritised containers, the crane
//! position, and the two legal crane operations (relocate, retrieve).
//!
//! Conventions: the truck lane is stack index 0, physical stacks are 1..=S,
//! and tiers are 1-based so a stack of height h has its top container at
//! tier h. Every mutation returns the [`Move`] it performed; the move trace
//! is the unit of energy accounting.

use thiserror::Error;

use crate::energy::kinematics;

/// A crane hook position: `(stack, tier)` with stack 0 being the truck lane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Slot {
    pub stack: usize,
    pub tier: usize,
}

impl Slot {
    pub fn new(stack: usize, tier: usize) -> Self {
        Slot { stack, tier }
    }
}

/// One container: retrieval priority (1 leaves first) and weight in tons.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Container {
    pub id: u32,
    pub weight: f64,
}

impl Container {
    pub fn new(id: u32, weight: f64) -> Self {
        Container { id, weight }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MoveKind {
    Relocate,
    Retrieve,
    EmptyReposition,
}

impl MoveKind {
    pub fn label(self) -> &'static str {
        match self {
            MoveKind::Relocate => "relocate",
            MoveKind::Retrieve => "retrieve",
            MoveKind::EmptyReposition => "empty",
        }
    }
}

/// One crane action with its kinematic quantities. `container_weight` is the
/// weight of the carried container (0 when the crane travels empty); the
/// moving weight of the whole action is crane weight + `container_weight`
/// and is applied by the energy model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Move {
    pub kind: MoveKind,
    /// Carried container, absent for empty repositioning.
    pub container_id: Option<u32>,
    pub from: Slot,
    pub to: Slot,
    /// Tiers hoisted (`h_m`). At most one of hoisted/lowered is nonzero.
    pub hoisted: u32,
    /// Tiers lowered (`l_m`).
    pub lowered: u32,
    /// Stacks crossed (`x_m`).
    pub crossed: u32,
    /// Weight of the carried container in tons (`W_c`), 0 for empty travel.
    pub container_weight: f64,
}

impl Move {
    /// Empty crane travel between two positions.
    pub fn empty_reposition(from: Slot, to: Slot) -> Self {
        let (hoisted, lowered, crossed) = kinematics(from, to);
        Move {
            kind: MoveKind::EmptyReposition,
            container_id: None,
            from,
            to,
            hoisted,
            lowered,
            crossed,
            container_weight: 0.0,
        }
    }

    fn loaded(kind: MoveKind, c: Container, from: Slot, to: Slot) -> Self {
        let (hoisted, lowered, crossed) = kinematics(from, to);
        Move {
            kind,
            container_id: Some(c.id),
            from,
            to,
            hoisted,
            lowered,
            crossed,
            container_weight: c.weight,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum YardError {
    #[error("relocation to full stack {0}")]
    RelocationToFullStack(usize),
    #[error("relocation from empty stack {0}")]
    EmptyOriginStack(usize),
    #[error("relocation from stack {0} to itself")]
    SameStack(usize),
    #[error("target container {id} is not on top of stack {stack}")]
    TargetBlocked { id: u32, stack: usize },
    #[error("stack index {0} out of range 1..={1}")]
    StackOutOfRange(usize, usize),
    #[error("stack {stack} holds {len} containers, exceeding max height {max}")]
    StackTooTall { stack: usize, len: usize, max: usize },
    #[error("duplicate container id {0}")]
    DuplicateContainerId(u32),
    #[error("the bay is empty")]
    EmptyBay,
}

/// Mutable single-bay state. Single-owner value: clone it to replay a
/// scenario, move it between worker threads freely.
#[derive(Debug, Clone)]
pub struct Bay {
    stacks: Vec<Vec<Container>>,
    /// Running minimum of ids from the bottom of each stack, maintained in
    /// lockstep with `stacks` so min-id queries are O(1).
    min_prefix: Vec<Vec<u32>>,
    max_height: usize,
    crane_at: Slot,
    /// Highest id present at construction. For instances whose ids form
    /// 1..=C this equals the container count C; it stays fixed while the
    /// bay empties so feature normalisation is stable across an episode.
    id_bound: u32,
}

impl Bay {
    /// Build a bay from bottom-to-top stack listings.
    pub fn new(
        stacks: Vec<Vec<Container>>,
        max_height: usize,
        crane_at: Slot,
    ) -> Result<Self, YardError> {
        let mut seen = std::collections::HashSet::new();
        let mut id_bound = 0;
        for (i, stack) in stacks.iter().enumerate() {
            if stack.len() > max_height {
                return Err(YardError::StackTooTall {
                    stack: i + 1,
                    len: stack.len(),
                    max: max_height,
                });
            }
            for c in stack {
                if !seen.insert(c.id) {
                    return Err(YardError::DuplicateContainerId(c.id));
                }
                id_bound = id_bound.max(c.id);
            }
        }
        let min_prefix = stacks
            .iter()
            .map(|stack| {
                let mut mins = Vec::with_capacity(stack.len());
                let mut min = u32::MAX;
                for c in stack {
                    min = min.min(c.id);
                    mins.push(min);
                }
                mins
            })
            .collect();
        Ok(Bay {
            stacks,
            min_prefix,
            max_height,
            crane_at,
            id_bound,
        })
    }

    /// Number of physical stacks S.
    pub fn stack_count(&self) -> usize {
        self.stacks.len()
    }

    /// Maximum allowed stack height H.
    pub fn max_height(&self) -> usize {
        self.max_height
    }

    pub fn crane_at(&self) -> Slot {
        self.crane_at
    }

    pub fn set_crane(&mut self, at: Slot) {
        self.crane_at = at;
    }

    /// Highest container id present at construction (the episode's C).
    pub fn id_bound(&self) -> u32 {
        self.id_bound
    }

    /// Containers currently in the bay.
    pub fn container_count(&self) -> usize {
        self.stacks.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.stacks.iter().all(Vec::is_empty)
    }

    /// Contents of a physical stack, bottom to top.
    pub fn stack(&self, index: usize) -> &[Container] {
        &self.stacks[index - 1]
    }

    pub fn height(&self, index: usize) -> usize {
        self.stacks[index - 1].len()
    }

    pub fn top(&self, index: usize) -> Option<Container> {
        self.stacks[index - 1].last().copied()
    }

    /// Smallest container id in a stack, O(1).
    pub fn min_id_in(&self, index: usize) -> Option<u32> {
        self.min_prefix[index - 1].last().copied()
    }

    /// The next container to retrieve: smallest id in the bay.
    pub fn target_container(&self) -> Option<u32> {
        (1..=self.stack_count())
            .filter_map(|s| self.min_id_in(s))
            .min()
    }

    /// Stack holding the current target container.
    pub fn target_stack(&self) -> Option<usize> {
        let target = self.target_container()?;
        (1..=self.stack_count()).find(|&s| self.min_id_in(s) == Some(target))
    }

    /// Stacks a container from `origin` may legally move to: every other
    /// stack that is not full, in ascending index order.
    pub fn legal_destinations(&self, origin: usize) -> Vec<usize> {
        debug_assert!((1..=self.stack_count()).contains(&origin));
        (1..=self.stack_count())
            .filter(|&d| d != origin && self.height(d) < self.max_height)
            .collect()
    }

    fn check_stack_index(&self, index: usize) -> Result<(), YardError> {
        if (1..=self.stack_count()).contains(&index) {
            Ok(())
        } else {
            Err(YardError::StackOutOfRange(index, self.stack_count()))
        }
    }

    fn push(&mut self, index: usize, c: Container) {
        let min = self.min_id_in(index).map_or(c.id, |m| m.min(c.id));
        self.stacks[index - 1].push(c);
        self.min_prefix[index - 1].push(min);
    }

    fn pop(&mut self, index: usize) -> Option<Container> {
        self.min_prefix[index - 1].pop();
        self.stacks[index - 1].pop()
    }

    /// Move the top container of `origin` onto `dest`. On error the bay is
    /// unchanged. The crane ends at the drop position.
    pub fn apply_relocate(&mut self, origin: usize, dest: usize) -> Result<Move, YardError> {
        self.check_stack_index(origin)?;
        self.check_stack_index(dest)?;
        if origin == dest {
            return Err(YardError::SameStack(origin));
        }
        if self.stacks[origin - 1].is_empty() {
            return Err(YardError::EmptyOriginStack(origin));
        }
        if self.height(dest) >= self.max_height {
            return Err(YardError::RelocationToFullStack(dest));
        }
        let pickup = Slot::new(origin, self.height(origin));
        let container = self.pop(origin).expect("origin checked non-empty");
        let landing = Slot::new(dest, self.height(dest) + 1);
        self.push(dest, container);
        self.crane_at = landing;
        debug_assert!(self.height(dest) <= self.max_height);
        Ok(Move::loaded(MoveKind::Relocate, container, pickup, landing))
    }

    /// Retrieve the target container onto the truck lane at `truck_tier`.
    /// Fails with `TargetBlocked` when the target is not on top.
    pub fn apply_retrieve(&mut self, truck_tier: usize) -> Result<Move, YardError> {
        let target = self.target_container().ok_or(YardError::EmptyBay)?;
        let stack = self.target_stack().expect("non-empty bay has a target stack");
        let top = self.top(stack).expect("target stack is non-empty");
        if top.id != target {
            return Err(YardError::TargetBlocked { id: target, stack });
        }
        let pickup = Slot::new(stack, self.height(stack));
        let container = self.pop(stack).expect("target stack is non-empty");
        let drop = Slot::new(0, truck_tier);
        self.crane_at = drop;
        Ok(Move::loaded(MoveKind::Retrieve, container, pickup, drop))
    }

    /// Multiset of ids currently in the bay, ascending.
    pub fn ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self
            .stacks
            .iter()
            .flat_map(|s| s.iter().map(|c| c.id))
            .collect();
        ids.sort_unstable();
        ids
    }

    /// Heaviest container currently in the bay.
    pub fn max_weight(&self) -> Option<f64> {
        self.stacks
            .iter()
            .flat_map(|s| s.iter().map(|c| c.weight))
            .fold(None, |acc: Option<f64>, w| Some(acc.map_or(w, |m| m.max(w))))
    }
}

/// Convenience constructor for tests and examples: stacks of `(id, weight)`
/// pairs, bottom to top, crane starting at the truck lane.
pub fn bay_from_ids(stacks: &[&[u32]], max_height: usize) -> Bay {
    let stacks = stacks
        .iter()
        .map(|s| s.iter().map(|&id| Container::new(id, 1.0)).collect())
        .collect();
    Bay::new(stacks, max_height, Slot::new(0, 1)).expect("valid test bay")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn target_is_smallest_id() {
        let bay = bay_from_ids(&[&[2, 3], &[7]], 4);
        assert_eq!(bay.target_container(), Some(2));
        let empty = bay_from_ids(&[&[], &[]], 4);
        assert_eq!(empty.target_container(), None);
        let full = bay_from_ids(&[&[9, 1], &[2, 3, 7], &[4, 5, 6], &[8]], 4);
        assert_eq!(full.target_container(), Some(1));
    }

    #[test]
    fn legal_destinations_filters_origin_and_full() {
        // S=3, H=2, heights [2,1,0], origin 1 -> [2,3]
        let bay = bay_from_ids(&[&[1, 2], &[3], &[]], 2);
        assert_eq!(bay.legal_destinations(1), vec![2, 3]);
        // S=3, H=2, heights [1,2,2], origin 1 -> []
        let bay = bay_from_ids(&[&[1], &[2, 3], &[4, 5]], 2);
        assert_eq!(bay.legal_destinations(1), Vec::<usize>::new());
        // S=4, H=4, heights [3,4,2,0], origin 3 -> [1,4]
        let bay = bay_from_ids(&[&[1, 2, 3], &[4, 5, 6, 7], &[8, 9], &[]], 4);
        assert_eq!(bay.legal_destinations(3), vec![1, 4]);
    }

    #[test]
    fn relocate_moves_top_container() {
        let mut bay = bay_from_ids(&[&[1, 2], &[3]], 4);
        let mv = bay.apply_relocate(1, 2).unwrap();
        assert_eq!(bay.height(1), 1);
        assert_eq!(bay.height(2), 2);
        assert_eq!(bay.top(2).unwrap().id, 2);
        assert_eq!(mv.kind, MoveKind::Relocate);
        assert_eq!(mv.container_id, Some(2));
        assert_eq!(bay.crane_at(), Slot::new(2, 2));
    }

    #[test]
    fn relocate_to_full_stack_rejected_bay_unchanged() {
        let mut bay = bay_from_ids(&[&[1, 2, 3], &[4, 5, 6]], 3);
        let before = bay.ids();
        let err = bay.apply_relocate(1, 2).unwrap_err();
        assert_eq!(err, YardError::RelocationToFullStack(2));
        assert_eq!(bay.ids(), before);
        assert_eq!(bay.height(1), 3);
    }

    #[test]
    fn relocate_rejects_same_and_empty() {
        let mut bay = bay_from_ids(&[&[1], &[]], 3);
        assert_eq!(bay.apply_relocate(1, 1).unwrap_err(), YardError::SameStack(1));
        assert_eq!(
            bay.apply_relocate(2, 1).unwrap_err(),
            YardError::EmptyOriginStack(2)
        );
    }

    #[test]
    fn relocate_kinematics_direct_lift() {
        // Pickup tier 2 on stack 1, landing tier 3 on stack 4.
        let mut bay = bay_from_ids(&[&[5, 6], &[7], &[8], &[1, 2]], 4);
        let mv = bay.apply_relocate(1, 4).unwrap();
        assert_eq!((mv.hoisted, mv.lowered, mv.crossed), (1, 0, 3));
        assert_eq!(mv.from, Slot::new(1, 2));
        assert_eq!(mv.to, Slot::new(4, 3));
    }

    #[test]
    fn retrieve_target_on_top() {
        // Target id 1 on top of stack 2 at tier 1, truck tier 1.
        let mut bay = bay_from_ids(&[&[4], &[1], &[5]], 3);
        let mv = bay.apply_retrieve(1).unwrap();
        assert_eq!(mv.kind, MoveKind::Retrieve);
        assert_eq!((mv.hoisted, mv.lowered, mv.crossed), (0, 0, 2));
        assert_eq!(mv.to, Slot::new(0, 1));
        assert_eq!(bay.ids(), vec![4, 5]);
        assert_eq!(bay.crane_at(), Slot::new(0, 1));
    }

    #[test]
    fn retrieve_blocked_target_rejected() {
        let mut bay = bay_from_ids(&[&[1, 2]], 3);
        assert_eq!(
            bay.apply_retrieve(1).unwrap_err(),
            YardError::TargetBlocked { id: 1, stack: 1 }
        );
        assert_eq!(bay.ids(), vec![1, 2]);
    }

    #[test]
    fn retrieve_from_tier_three_lowers_two() {
        // Target at tier 3 of stack 1, truck tier 1.
        let mut bay = bay_from_ids(&[&[8, 9, 1], &[2]], 4);
        let mv = bay.apply_retrieve(1).unwrap();
        assert_eq!((mv.hoisted, mv.lowered, mv.crossed), (0, 2, 1));
    }

    #[test]
    fn conservation_under_relocate_and_retrieve() {
        let mut bay = bay_from_ids(&[&[3, 1], &[2], &[]], 3);
        let before = bay.ids();
        bay.apply_relocate(1, 3).unwrap();
        assert_eq!(bay.ids(), before);
        bay.apply_retrieve(1).unwrap();
        assert_eq!(bay.ids(), vec![2, 3]);
    }

    #[test]
    fn inverse_relocate_restores_heights_and_tops() {
        let mut bay = bay_from_ids(&[&[4, 2], &[9], &[]], 3);
        let heights: Vec<usize> = (1..=3).map(|s| bay.height(s)).collect();
        let tops: Vec<Option<u32>> = (1..=3).map(|s| bay.top(s).map(|c| c.id)).collect();
        bay.apply_relocate(1, 3).unwrap();
        bay.apply_relocate(3, 1).unwrap();
        assert_eq!(heights, (1..=3).map(|s| bay.height(s)).collect::<Vec<_>>());
        assert_eq!(
            tops,
            (1..=3)
                .map(|s| bay.top(s).map(|c| c.id))
                .collect::<Vec<_>>()
        );
    }

    #[test]
    fn min_prefix_tracks_pops() {
        let mut bay = bay_from_ids(&[&[5, 1, 7], &[]], 3);
        assert_eq!(bay.min_id_in(1), Some(1));
        bay.apply_relocate(1, 2).unwrap(); // move 7
        assert_eq!(bay.min_id_in(1), Some(1));
        bay.apply_relocate(1, 2).unwrap(); // move 1
        assert_eq!(bay.min_id_in(1), Some(5));
        assert_eq!(bay.min_id_in(2), Some(1));
    }

    #[test]
    fn duplicate_ids_rejected_at_construction() {
        let stacks = vec![
            vec![Container::new(1, 1.0)],
            vec![Container::new(1, 2.0)],
        ];
        assert_eq!(
            Bay::new(stacks, 3, Slot::new(0, 1)).unwrap_err(),
            YardError::DuplicateContainerId(1)
        );
    }

    #[test]
    fn overtall_stack_rejected_at_construction() {
        let stacks = vec![vec![
            Container::new(1, 1.0),
            Container::new(2, 1.0),
            Container::new(3, 1.0),
        ]];
        assert!(matches!(
            Bay::new(stacks, 2, Slot::new(0, 1)).unwrap_err(),
            YardError::StackTooTall { .. }
        ));
    }
}
