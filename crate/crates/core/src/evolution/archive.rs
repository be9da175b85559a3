use crate::analysis::hypervolume_2d;
use crate::error::Result;
use crate::objectives::ObjectiveVector;
use crate::problem::CalibrationVector;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArchiveEntry {
    pub genome: CalibrationVector,
    pub objectives: ObjectiveVector,
}

/// Mutually non-dominated set of evaluated solutions.
///
/// Entries are kept sorted by chamfer ascending, which for two objectives means cost
/// strictly descending. A candidate equal to an existing entry in objective space is
/// rejected, so the first genome to reach a point keeps it.
#[derive(Debug, Clone, Default)]
pub struct ParetoArchive {
    entries: Vec<ArchiveEntry>,
}

impl ParetoArchive {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_entries(entries: impl IntoIterator<Item = ArchiveEntry>) -> Self {
        let mut archive = Self::new();
        for e in entries {
            archive.insert(e.genome, e.objectives);
        }
        archive
    }

    /// Inserts unless dominated by (or equal to) an existing entry; evicts entries the
    /// newcomer dominates. Returns whether it was inserted.
    pub fn insert(&mut self, genome: CalibrationVector, objectives: ObjectiveVector) -> bool {
        let ObjectiveVector { chamfer, comp_cost } = objectives;
        let pos = self.entries.partition_point(|e| e.objectives.chamfer < chamfer);
        if pos > 0 && self.entries[pos - 1].objectives.comp_cost <= comp_cost {
            return false;
        }
        if let Some(e) = self.entries.get(pos) {
            if e.objectives.chamfer == chamfer && e.objectives.comp_cost <= comp_cost {
                return false;
            }
        }
        let end = pos
            + self.entries[pos..]
                .iter()
                .take_while(|e| e.objectives.comp_cost >= comp_cost)
                .count();
        self.entries.splice(pos..end, [ArchiveEntry { genome, objectives }]);
        true
    }

    pub fn entries(&self) -> &[ArchiveEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn objectives(&self) -> Vec<ObjectiveVector> {
        self.entries.iter().map(|e| e.objectives).collect()
    }

    pub fn min_chamfer(&self) -> Option<&ArchiveEntry> {
        self.entries.first()
    }

    pub fn min_cost(&self) -> Option<&ArchiveEntry> {
        self.entries.last()
    }

    /// Best chamfer among entries whose cost does not exceed `max_cost`.
    pub fn best_chamfer_within_cost(&self, max_cost: f64) -> Option<&ArchiveEntry> {
        self.entries.iter().find(|e| e.objectives.comp_cost <= max_cost)
    }

    pub fn hypervolume(&self, reference: ObjectiveVector) -> Result<f64> {
        hypervolume_2d(&self.objectives(), reference)
    }
}
