//! Long-term memory with three segments: archived demonstrations per
//! relation, relation knowledge (names and current model), and the history
//! of grounded commands.
//!
//! On disk a memory is a directory:
//!
//! ```text
//! memory/
//!   samples/<relation>.jsonl   one demonstration record per line
//!   relations.json             names and model state per relation
//!   commands.jsonl             one command record per line
//!   manifest.json              sha256 of every file above
//! ```

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geometry::ObjectCatalog;
use crate::relation::{Demonstration, ModelError, RelationCommand, RelationModel, RelationSymbol};

const MANIFEST: &str = "manifest.json";
const RELATIONS: &str = "relations.json";
const COMMANDS: &str = "commands.jsonl";
const SAMPLES_DIR: &str = "samples";

#[derive(Debug, Error)]
pub enum MemoryError {
    #[error("storage failure at {path}: {message}")]
    StorageFailure { path: String, message: String },
    #[error("corrupt snapshot: {0}")]
    CorruptSnapshot(String),
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn storage(path: &Path, e: impl ToString) -> MemoryError {
    MemoryError::StorageFailure { path: path.display().to_string(), message: e.to_string() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub captured_at: f64,
    pub demonstration: Demonstration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandRecord {
    pub timestamp: f64,
    pub command: RelationCommand,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationEntity {
    pub symbol: RelationSymbol,
    pub names: Vec<String>,
    pub model: Option<RelationModel>,
}

/// All collected demonstrations, append-only per relation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SampleSegment {
    entries: BTreeMap<String, Vec<SampleRecord>>,
}

impl SampleSegment {
    fn append(&mut self, record: SampleRecord) {
        let key = record.demonstration.command.relation.id.clone();
        self.entries.entry(key).or_default().push(record);
    }

    /// Demonstrations of `relation` in capture order.
    pub fn query(&self, relation: &str) -> Vec<Demonstration> {
        self.entries.get(relation).map(|v| v.iter().map(|r| r.demonstration.clone()).collect()).unwrap_or_default()
    }

    pub fn count(&self, relation: &str) -> usize {
        self.entries.get(relation).map_or(0, Vec::len)
    }
}

/// Prior knowledge about each relation plus its current model.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RelationSegment {
    entities: BTreeMap<String, RelationEntity>,
}

impl RelationSegment {
    pub fn get(&self, relation: &str) -> Option<&RelationEntity> {
        self.entities.get(relation)
    }

    pub fn iter(&self) -> impl Iterator<Item = &RelationEntity> {
        self.entities.values()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CommandSegment {
    entries: Vec<CommandRecord>,
}

impl CommandSegment {
    pub fn latest(&self) -> Option<&CommandRecord> {
        self.entries.last()
    }

    pub fn all(&self) -> &[CommandRecord] {
        &self.entries
    }
}

#[derive(Debug, Clone, Default)]
pub struct Memory {
    samples: SampleSegment,
    relations: RelationSegment,
    commands: CommandSegment,
    backing: Option<PathBuf>,
}

impl PartialEq for Memory {
    fn eq(&self, other: &Self) -> bool {
        self.samples == other.samples && self.relations == other.relations && self.commands == other.commands
    }
}

impl Memory {
    /// Fresh memory that knows the given relations by name but has no
    /// models, samples or commands yet.
    pub fn new(relations: impl IntoIterator<Item = (RelationSymbol, Vec<String>)>) -> Self {
        let entities = relations
            .into_iter()
            .map(|(symbol, names)| (symbol.id.clone(), RelationEntity { symbol, names, model: None }))
            .collect();
        Self { relations: RelationSegment { entities }, ..Self::default() }
    }

    /// Memory persisted under `dir`: restored if a snapshot exists there,
    /// otherwise initialized from `relations` and written out.
    pub fn open(
        dir: impl Into<PathBuf>,
        relations: impl IntoIterator<Item = (RelationSymbol, Vec<String>)>,
    ) -> Result<Self, MemoryError> {
        let dir = dir.into();
        let mut memory = if dir.join(MANIFEST).exists() { Self::restore(&dir)? } else { Self::new(relations) };
        if !dir.join(MANIFEST).exists() {
            memory.snapshot(&dir)?;
        }
        memory.backing = Some(dir);
        Ok(memory)
    }

    pub fn samples(&self) -> &SampleSegment {
        &self.samples
    }

    pub fn relations(&self) -> &RelationSegment {
        &self.relations
    }

    pub fn commands(&self) -> &CommandSegment {
        &self.commands
    }

    pub fn model(&self, relation: &str) -> Option<&RelationModel> {
        self.relations.get(relation).and_then(|e| e.model.as_ref())
    }

    pub fn demo_count(&self, relation: &str) -> u64 {
        self.model(relation).map_or(0, RelationModel::demo_count)
    }

    pub fn store_sample(&mut self, demo: &Demonstration) -> Result<(), MemoryError> {
        let record = SampleRecord { captured_at: demo.scene_after.timestamp, demonstration: demo.clone() };
        if let Some(dir) = &self.backing {
            let rel = sample_file(&demo.command.relation.id);
            append_line(&dir.join(&rel), &record)?;
            write_manifest(dir)?;
        }
        self.samples.append(record);
        Ok(())
    }

    pub fn query_samples(&self, relation: &str) -> Vec<Demonstration> {
        self.samples.query(relation)
    }

    pub fn record_command(&mut self, timestamp: f64, command: &RelationCommand) -> Result<(), MemoryError> {
        let record = CommandRecord { timestamp, command: command.clone() };
        if let Some(dir) = &self.backing {
            append_line(&dir.join(COMMANDS), &record)?;
            write_manifest(dir)?;
        }
        self.commands.entries.push(record);
        Ok(())
    }

    /// Archives `demo` and folds it into the relation's model. The model
    /// update sees only the current model and the new demonstration.
    pub fn learn(&mut self, demo: &Demonstration, catalog: &ObjectCatalog) -> Result<&RelationModel, MemoryError> {
        let id = demo.command.relation.id.clone();
        let entity = self.relations.entities.get(&id).ok_or_else(|| MemoryError::UnknownRelation(id.clone()))?;
        let mut model = entity.model.clone().unwrap_or_else(|| RelationModel::new(id.clone()));
        model.update_incremental(demo, catalog)?;
        self.store_sample(demo)?;
        self.set_model(&id, model)?;
        Ok(self.model(&id).expect("just set"))
    }

    /// Re-fits a relation's model from every archived demonstration.
    pub fn retrain_batch(&mut self, relation: &str, catalog: &ObjectCatalog) -> Result<(), MemoryError> {
        let demos = self.query_samples(relation);
        let model = if demos.is_empty() { None } else { Some(RelationModel::update_batch(&demos, catalog)?) };
        match model {
            Some(m) => self.set_model(relation, m),
            None => Ok(()),
        }
    }

    fn set_model(&mut self, relation: &str, model: RelationModel) -> Result<(), MemoryError> {
        let entity =
            self.relations.entities.get_mut(relation).ok_or_else(|| MemoryError::UnknownRelation(relation.into()))?;
        entity.model = Some(model);
        if let Some(dir) = &self.backing {
            write_json(&dir.join(RELATIONS), &self.relations.entities.values().collect::<Vec<_>>())?;
            write_manifest(dir)?;
        }
        Ok(())
    }

    /// Writes all three segments plus a checksum manifest to `dir`.
    pub fn snapshot(&self, dir: &Path) -> Result<(), MemoryError> {
        let samples_dir = dir.join(SAMPLES_DIR);
        fs::create_dir_all(&samples_dir).map_err(|e| storage(&samples_dir, e))?;
        for entry in fs::read_dir(&samples_dir).map_err(|e| storage(&samples_dir, e))? {
            let path = entry.map_err(|e| storage(&samples_dir, e))?.path();
            fs::remove_file(&path).map_err(|e| storage(&path, e))?;
        }
        for (relation, records) in &self.samples.entries {
            write_lines(&dir.join(sample_file(relation)), records)?;
        }
        write_json(&dir.join(RELATIONS), &self.relations.entities.values().collect::<Vec<_>>())?;
        write_lines(&dir.join(COMMANDS), &self.commands.entries)?;
        write_manifest(dir)
    }

    /// Reads a snapshot written by [`Memory::snapshot`], verifying every
    /// file against the manifest. The result is not backed by `dir`.
    pub fn restore(dir: &Path) -> Result<Self, MemoryError> {
        let manifest_path = dir.join(MANIFEST);
        let manifest: BTreeMap<String, String> =
            serde_json::from_slice(&fs::read(&manifest_path).map_err(|e| storage(&manifest_path, e))?)
                .map_err(|e| MemoryError::CorruptSnapshot(format!("manifest: {e}")))?;
        let current = checksums(dir)?;
        if current != manifest {
            let bad: Vec<_> = manifest
                .keys()
                .chain(current.keys())
                .filter(|k| manifest.get(*k) != current.get(*k))
                .cloned()
                .collect();
            return Err(MemoryError::CorruptSnapshot(format!("checksum mismatch in {bad:?}")));
        }

        let entities: Vec<RelationEntity> = parse_json(&dir.join(RELATIONS))?;
        let relations = RelationSegment { entities: entities.into_iter().map(|e| (e.symbol.id.clone(), e)).collect() };
        let commands = CommandSegment { entries: parse_lines(&dir.join(COMMANDS))? };
        let mut samples = SampleSegment::default();
        for name in manifest.keys().filter(|k| k.starts_with(SAMPLES_DIR)) {
            for record in parse_lines::<SampleRecord>(&dir.join(name))? {
                samples.append(record);
            }
        }
        Ok(Self { samples, relations, commands, backing: None })
    }

    /// Stable digest of the full memory contents.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for (rel, records) in &self.samples.entries {
            h.update(rel.as_bytes());
            h.update(serde_json::to_vec(records).expect("serializable"));
        }
        h.update(serde_json::to_vec(&self.relations.entities).expect("serializable"));
        h.update(serde_json::to_vec(&self.commands.entries).expect("serializable"));
        hex::encode(h.finalize())
    }
}

fn sample_file(relation: &str) -> String {
    format!("{SAMPLES_DIR}/{relation}.jsonl")
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), MemoryError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| storage(path, e))?;
    fs::write(path, text).map_err(|e| storage(path, e))
}

fn write_lines<T: Serialize>(path: &Path, records: &[T]) -> Result<(), MemoryError> {
    let mut text = String::new();
    for r in records {
        text.push_str(&serde_json::to_string(r).map_err(|e| storage(path, e))?);
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| storage(path, e))
}

fn append_line<T: Serialize>(path: &Path, record: &T) -> Result<(), MemoryError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| storage(parent, e))?;
    }
    let mut line = serde_json::to_string(record).map_err(|e| storage(path, e))?;
    line.push('\n');
    let mut file = OpenOptions::new().create(true).append(true).open(path).map_err(|e| storage(path, e))?;
    file.write_all(line.as_bytes()).map_err(|e| storage(path, e))?;
    file.sync_data().map_err(|e| storage(path, e))
}

fn checksums(dir: &Path) -> Result<BTreeMap<String, String>, MemoryError> {
    let mut files = vec![RELATIONS.to_owned(), COMMANDS.to_owned()];
    let samples_dir = dir.join(SAMPLES_DIR);
    if samples_dir.exists() {
        for entry in fs::read_dir(&samples_dir).map_err(|e| storage(&samples_dir, e))? {
            let name = entry.map_err(|e| storage(&samples_dir, e))?.file_name();
            files.push(format!("{SAMPLES_DIR}/{}", name.to_string_lossy()));
        }
    }
    let mut out = BTreeMap::new();
    for name in files {
        let path = dir.join(&name);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(MemoryError::CorruptSnapshot(format!("missing {name}")));
            }
            Err(e) => return Err(storage(&path, e)),
        };
        out.insert(name, hex::encode(Sha256::digest(&bytes)));
    }
    Ok(out)
}

fn write_manifest(dir: &Path) -> Result<(), MemoryError> {
    let sums = checksums(dir)?;
    write_json(&dir.join(MANIFEST), &sums)
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, MemoryError> {
    let bytes = fs::read(path).map_err(|e| storage(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| MemoryError::CorruptSnapshot(format!("{}: {e}", path.display())))
}

fn parse_lines<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, MemoryError> {
    let text = fs::read_to_string(path).map_err(|e| storage(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| MemoryError::CorruptSnapshot(format!("{}: {e}", path.display()))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ObjectModel, Pose, Scene};
    use crate::relation::standard_relations;

    fn catalog() -> ObjectCatalog {
        ObjectCatalog::new([
            ObjectModel::new("cup", "cup", [0.08, 0.08, 0.1]).unwrap(),
            ObjectModel::new("tea", "tea", [0.06, 0.06, 0.12]).unwrap(),
        ])
        .unwrap()
    }

    fn memory() -> Memory {
        Memory::new(standard_relations().into_iter().map(|s| {
            let n = s.display_name.clone();
            (s, vec![n])
        }))
    }

    fn demo(relation: &RelationSymbol, x: f64, t: f64) -> Demonstration {
        let before = Scene::new(t).with("cup", Pose::at(0.0, 0.0, 0.05)).with("tea", Pose::at(-0.3, 0.0, 0.06));
        let mut after = before.clone().with("tea", Pose::at(x, 0.05 * t, 0.06));
        after.timestamp = t + 0.5;
        Demonstration {
            scene_before: before,
            command: RelationCommand::new(relation.clone(), "tea", vec!["cup".into()]).unwrap(),
            scene_after: after,
        }
    }

    #[test]
    fn starts_empty() {
        let m = memory();
        assert!(m.relations().iter().all(|e| e.model.is_none()));
        assert!(m.query_samples("right_of").is_empty());
        assert!(m.query_samples("nonexistent").is_empty());
        assert!(m.commands().latest().is_none());
    }

    #[test]
    fn store_then_query_in_order() {
        let mut m = memory();
        let rel = &standard_relations()[0];
        let (d1, d2) = (demo(rel, 0.2, 0.0), demo(rel, 0.25, 1.0));
        m.store_sample(&d1).unwrap();
        assert_eq!(m.query_samples(&rel.id).last(), Some(&d1));
        m.store_sample(&d2).unwrap();
        assert_eq!(m.query_samples(&rel.id), vec![d1, d2]);
    }

    #[test]
    fn learn_counts_demos() {
        let mut m = memory();
        let rel = &standard_relations()[0];
        m.learn(&demo(rel, 0.2, 0.0), &catalog()).unwrap();
        m.learn(&demo(rel, 0.25, 1.0), &catalog()).unwrap();
        assert_eq!(m.demo_count(&rel.id), 2);
        assert_eq!(m.samples().count(&rel.id), 2);
        let unknown = RelationSymbol::new("nope", "nope");
        assert!(matches!(m.learn(&demo(&unknown, 0.2, 2.0), &catalog()), Err(MemoryError::UnknownRelation(_))));
    }

    fn filled() -> Memory {
        let mut m = memory();
        for rel in standard_relations().iter().take(3) {
            for i in 0..5 {
                let d = demo(rel, 0.15 + 0.02 * i as f64, i as f64);
                m.record_command(i as f64, &d.command).unwrap();
                m.learn(&d, &catalog()).unwrap();
            }
        }
        m
    }

    #[test]
    fn snapshot_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m = filled();
        m.snapshot(dir.path()).unwrap();
        let back = Memory::restore(dir.path()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.content_hash(), m.content_hash());
    }

    #[test]
    fn empty_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m = memory();
        m.snapshot(dir.path()).unwrap();
        assert_eq!(Memory::restore(dir.path()).unwrap(), m);
    }

    #[test]
    fn truncated_snapshot_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        filled().snapshot(dir.path()).unwrap();
        let path = dir.path().join("samples/right_of.jsonl");
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        assert!(matches!(Memory::restore(dir.path()), Err(MemoryError::CorruptSnapshot(_))));
    }

    #[test]
    fn missing_file_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        filled().snapshot(dir.path()).unwrap();
        fs::remove_file(dir.path().join(RELATIONS)).unwrap();
        assert!(matches!(Memory::restore(dir.path()), Err(MemoryError::CorruptSnapshot(_))));
    }

    #[test]
    fn backed_memory_persists_each_step() {
        let dir = tempfile::tempdir().unwrap();
        let rel = &standard_relations()[1];
        let relations = || standard_relations().into_iter().map(|s| (s, vec![]));
        {
            let mut m = Memory::open(dir.path(), relations()).unwrap();
            m.record_command(0.0, &demo(rel, -0.2, 0.0).command).unwrap();
            m.learn(&demo(rel, -0.2, 0.0), &catalog()).unwrap();
        }
        let m = Memory::open(dir.path(), relations()).unwrap();
        assert_eq!(m.demo_count(&rel.id), 1);
        assert_eq!(m.commands().all().len(), 1);
        assert_eq!(m.query_samples(&rel.id).len(), 1);
    }

    #[test]
    fn restore_then_update_matches_unbroken_session() {
        let dir = tempfile::tempdir().unwrap();
        let mut unbroken = filled();
        unbroken.snapshot(dir.path()).unwrap();
        let mut restored = Memory::restore(dir.path()).unwrap();
        let rel = &standard_relations()[0];
        let fresh = demo(rel, 0.3, 10.0);
        unbroken.learn(&fresh, &catalog()).unwrap();
        restored.learn(&fresh, &catalog()).unwrap();
        assert_eq!(unbroken.model(&rel.id), restored.model(&rel.id));
    }

    #[test]
    fn batch_retrain_agrees() {
        let mut m = filled();
        let rel = &standard_relations()[2];
        let inc = m.model(&rel.id).unwrap().theta().unwrap().mean();
        m.retrain_batch(&rel.id, &catalog()).unwrap();
        let batch = m.model(&rel.id).unwrap().theta().unwrap().mean();
        assert!((inc.r - batch.r).abs() < 1e-9 && (inc.h - batch.h).abs() < 1e-9);
    }
}
