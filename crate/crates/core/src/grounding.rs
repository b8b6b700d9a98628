//! Turns command text into a [`RelationCommand`] by matching known object
//! and relation phrases. Matching works on normalized word tokens; longer
//! phrases win over shorter ones they overlap.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{read_json, GeometryError, ObjectCatalog, Scene};
use crate::relation::{standard_relations, RelationCommand, RelationSymbol};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GroundingError {
    #[error("no known relation phrase in command")]
    NoRelationMatch,
    #[error("no known object mentioned in command")]
    NoTargetMatch,
    #[error("command names a target but no reference object")]
    InsufficientReferences,
    #[error("ambiguous phrase `{phrase}` matches both `{first}` and `{second}`")]
    AmbiguousMatch { phrase: String, first: String, second: String },
    #[error("object `{0}` is not in the scene")]
    ObjectNotInScene(String),
    #[error("invalid grounding catalog: {0}")]
    InvalidCatalog(String),
}

impl GroundingError {
    /// Stable machine-readable name of the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            GroundingError::NoRelationMatch => "NoRelationMatch",
            GroundingError::NoTargetMatch => "NoTargetMatch",
            GroundingError::InsufficientReferences => "InsufficientReferences",
            GroundingError::AmbiguousMatch { .. } => "AmbiguousMatch",
            GroundingError::ObjectNotInScene(_) => "ObjectNotInScene",
            GroundingError::InvalidCatalog(_) => "InvalidCatalog",
        }
    }
}

/// Lowercases, turns punctuation into spaces and collapses whitespace.
pub fn normalize(text: &str) -> String {
    text.chars()
        .map(|c| if c.is_alphanumeric() || c == '\'' { c.to_ascii_lowercase() } else { ' ' })
        .collect::<String>()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

fn tokens(text: &str) -> Vec<String> {
    normalize(text).split(' ').filter(|t| !t.is_empty()).map(str::to_owned).collect()
}

fn contains_tokens(haystack: &[String], needle: &[String]) -> bool {
    needle.len() <= haystack.len() && haystack.windows(needle.len()).any(|w| w == needle)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Object,
    Relation,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CatalogFile {
    objects: BTreeMap<String, Vec<String>>,
    relations: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone)]
struct Phrase {
    kind: Kind,
    id: String,
    tokens: Vec<String>,
}

/// Surface strings for objects and relations.
#[derive(Debug, Clone)]
pub struct GroundingCatalog {
    objects: BTreeMap<String, Vec<String>>,
    relations: BTreeMap<String, Vec<String>>,
    symbols: BTreeMap<String, RelationSymbol>,
    phrases: Vec<Phrase>,
}

impl GroundingCatalog {
    pub fn new(
        objects: BTreeMap<String, Vec<String>>,
        relations: BTreeMap<String, Vec<String>>,
    ) -> Result<Self, GroundingError> {
        let norm = |m: BTreeMap<String, Vec<String>>| -> Result<BTreeMap<String, Vec<String>>, GroundingError> {
            m.into_iter()
                .map(|(id, names)| {
                    let names: Vec<String> = names.iter().map(|n| normalize(n)).collect();
                    if names.is_empty() || names.iter().any(String::is_empty) {
                        return Err(GroundingError::InvalidCatalog(format!("`{id}` has an empty surface string")));
                    }
                    Ok((id, names))
                })
                .collect()
        };
        let objects = norm(objects)?;
        let relations = norm(relations)?;
        let standard: BTreeMap<_, _> = standard_relations().into_iter().map(|s| (s.id.clone(), s)).collect();
        let symbols = relations
            .iter()
            .map(|(id, names)| {
                let sym =
                    standard.get(id).cloned().unwrap_or_else(|| RelationSymbol::new(id.clone(), names[0].clone()));
                (id.clone(), sym)
            })
            .collect();

        let mut phrases = Vec::new();
        for (kind, map) in [(Kind::Object, &objects), (Kind::Relation, &relations)] {
            for (id, names) in map {
                for name in names {
                    phrases.push(Phrase { kind, id: id.clone(), tokens: tokens(name) });
                }
            }
        }
        for a in &phrases {
            for b in &phrases {
                if a.kind == b.kind && a.id != b.id && contains_tokens(&b.tokens, &a.tokens) {
                    return Err(GroundingError::InvalidCatalog(format!(
                        "`{}` ({}) is contained in `{}` ({})",
                        a.tokens.join(" "),
                        a.id,
                        b.tokens.join(" "),
                        b.id
                    )));
                }
            }
        }
        Ok(Self { objects, relations, symbols, phrases })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GroundingError> {
        let file: CatalogFile =
            read_json(path.as_ref()).map_err(|e: GeometryError| GroundingError::InvalidCatalog(e.to_string()))?;
        Self::new(file.objects, file.relations)
    }

    pub fn to_json(&self) -> String {
        let file = CatalogFile { objects: self.objects.clone(), relations: self.relations.clone() };
        serde_json::to_string_pretty(&file).expect("catalog serializes")
    }

    /// Object names from `objects` plus the standard relation phrases.
    pub fn standard(objects: &ObjectCatalog) -> Self {
        let objects = objects.iter().map(|o| (o.id.clone(), vec![o.name.clone()])).collect();
        Self::new(objects, standard_relation_phrases()).expect("standard catalog is unambiguous")
    }

    pub fn relation(&self, id: &str) -> Option<&RelationSymbol> {
        self.symbols.get(id)
    }

    pub fn relations(&self) -> impl Iterator<Item = &RelationSymbol> {
        self.symbols.values()
    }

    /// Preferred surface string of an object.
    pub fn object_name(&self, id: &str) -> Option<&str> {
        self.objects.get(id).map(|n| n[0].as_str())
    }

    /// Preferred surface string of a relation.
    pub fn relation_phrase(&self, id: &str) -> Option<&str> {
        self.relations.get(id).map(|n| n[0].as_str())
    }

    /// Parses `text` into a command whose objects all exist in `scene`.
    /// The first object mentioned is the target, the rest are references in
    /// order of mention.
    pub fn ground(&self, text: &str, scene: &Scene) -> Result<RelationCommand, GroundingError> {
        let toks = tokens(text);
        let mut found: Vec<(usize, &Phrase)> = Vec::new();
        for p in &self.phrases {
            for start in 0..toks.len() {
                if toks[start..].starts_with(&p.tokens) {
                    found.push((start, p));
                }
            }
        }
        found.sort_by(|a, b| b.1.tokens.len().cmp(&a.1.tokens.len()).then(a.0.cmp(&b.0)));

        let mut taken: Vec<(usize, &Phrase)> = Vec::new();
        for (start, p) in found {
            let end = start + p.tokens.len();
            let clash = taken.iter().find(|(s, q)| start < s + q.tokens.len() && *s < end);
            match clash {
                None => taken.push((start, p)),
                Some((s, q))
                    if *s == start && q.tokens.len() == p.tokens.len() && (q.id != p.id || q.kind != p.kind) =>
                {
                    return Err(GroundingError::AmbiguousMatch {
                        phrase: p.tokens.join(" "),
                        first: q.id.clone(),
                        second: p.id.clone(),
                    });
                }
                Some(_) => {}
            }
        }
        taken.sort_by_key(|(s, _)| *s);

        let mut relation: Option<&Phrase> = None;
        let mut objects: Vec<&str> = Vec::new();
        for (_, p) in &taken {
            match p.kind {
                Kind::Relation => match relation {
                    Some(r) if r.id != p.id => {
                        return Err(GroundingError::AmbiguousMatch {
                            phrase: p.tokens.join(" "),
                            first: r.id.clone(),
                            second: p.id.clone(),
                        });
                    }
                    _ => relation = Some(p),
                },
                Kind::Object => {
                    if !objects.contains(&p.id.as_str()) {
                        objects.push(&p.id);
                    }
                }
            }
        }
        let relation = relation.ok_or(GroundingError::NoRelationMatch)?;
        let (target, references) = objects.split_first().ok_or(GroundingError::NoTargetMatch)?;
        if references.is_empty() {
            return Err(GroundingError::InsufficientReferences);
        }
        if let Some(missing) = objects.iter().find(|id| !scene.contains(id)) {
            return Err(GroundingError::ObjectNotInScene((*missing).to_owned()));
        }
        Ok(RelationCommand {
            relation: self.symbols[&relation.id].clone(),
            target: (*target).to_owned(),
            references: references.iter().map(|s| (*s).to_owned()).collect(),
        })
    }

    /// Renders `command` with one of the sentence templates. `variant`
    /// selects the verb.
    pub fn sentence(&self, command: &RelationCommand, variant: usize) -> Option<String> {
        const VERBS: [&str; 3] = ["Put", "Place", "Move"];
        let target = self.object_name(&command.target)?;
        let names = command
            .references
            .iter()
            .map(|r| self.object_name(r).map(|n| format!("the {n}")))
            .collect::<Option<Vec<_>>>()?;
        let refs = match names.as_slice() {
            [one] => one.clone(),
            [init @ .., last] => format!("{} and {}", init.join(", "), last),
            [] => return None,
        };
        let phrase = self.relation_phrase(&command.relation.id)?;
        Some(format!("{} the {target} {phrase} {refs}.", VERBS[variant % VERBS.len()]))
    }
}

pub fn standard_relation_phrases() -> BTreeMap<String, Vec<String>> {
    let table: [(&str, &[&str]); 12] = [
        ("right_of", &["to the right of", "on the right side of", "right of", "right"]),
        ("left_of", &["to the left of", "on the left side of", "left of", "left"]),
        ("behind", &["behind"]),
        ("in_front_of", &["in front of", "front"]),
        ("on_top_of", &["on top of", "onto"]),
        ("close_to", &["close to", "next to", "near"]),
        ("far_from", &["far from", "far away from"]),
        ("between", &["between"]),
        ("among", &["among", "amongst"]),
        ("closer", &["closer to", "closer"]),
        ("farther_from", &["farther from", "farther away from", "further from"]),
        ("on_the_other_side_of", &["on the other side of", "other side of"]),
    ];
    table.into_iter().map(|(id, names)| (id.to_owned(), names.iter().map(|s| (*s).to_owned()).collect())).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryKind {
    NoModel,
    InsufficientModel,
    Thanks,
}

/// What the robot says when it asks for help or thanks the demonstrator.
pub fn verbalize_query(kind: QueryKind, relation: &RelationSymbol) -> String {
    match kind {
        QueryKind::NoModel => {
            format!("I am sorry, I don't know what '{}' means yet, can you show me what to do?", relation.display_name)
        }
        QueryKind::InsufficientModel => {
            "Sorry, I cannot do it with my current knowledge. Can you show me what I should do?".to_owned()
        }
        QueryKind::Thanks => {
            format!("Thanks, I think I now know the meaning of '{}' a bit better.", relation.display_name)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Pose;

    fn catalog() -> GroundingCatalog {
        let objects = ["tea", "cup", "plate", "fork", "spoon", "cereal box"]
            .iter()
            .map(|n| (n.replace(' ', "_"), vec![(*n).to_owned()]))
            .collect();
        GroundingCatalog::new(objects, standard_relation_phrases()).unwrap()
    }

    fn scene() -> Scene {
        ["tea", "cup", "plate", "fork", "spoon", "cereal_box"]
            .iter()
            .enumerate()
            .fold(Scene::new(0.0), |s, (i, id)| s.with(*id, Pose::at(i as f64 * 0.1, 0.0, 0.0)))
    }

    #[test]
    fn grounds_right_of() {
        let cmd = catalog().ground("Put the tea to the right of the cup", &scene()).unwrap();
        assert_eq!(cmd.relation.id, "right_of");
        assert_eq!(cmd.target, "tea");
        assert_eq!(cmd.references, vec!["cup"]);
    }

    #[test]
    fn grounds_between() {
        let cmd = catalog().ground("Move the plate between the fork and the spoon", &scene()).unwrap();
        assert_eq!(cmd.relation.id, "between");
        assert_eq!(cmd.target, "plate");
        assert_eq!(cmd.references, vec!["fork", "spoon"]);
    }

    #[test]
    fn no_relation() {
        assert_eq!(catalog().ground("Wiggle the spoon", &scene()).unwrap_err(), GroundingError::NoRelationMatch);
        assert_eq!(catalog().ground("gibberish", &scene()).unwrap_err().kind(), "NoRelationMatch");
    }

    #[test]
    fn missing_objects() {
        let c = catalog();
        assert_eq!(c.ground("put it behind", &scene()).unwrap_err(), GroundingError::NoTargetMatch);
        assert_eq!(c.ground("put the cup behind", &scene()).unwrap_err(), GroundingError::InsufficientReferences);
        let small = Scene::new(0.0).with("cup", Pose::at(0.0, 0.0, 0.0));
        assert_eq!(
            c.ground("put the cup behind the plate", &small).unwrap_err(),
            GroundingError::ObjectNotInScene("plate".into())
        );
    }

    #[test]
    fn case_and_whitespace_insensitive() {
        let c = catalog();
        let text = "Put the  tea   to the right of the cup.";
        assert_eq!(c.ground(&text.to_uppercase(), &scene()).unwrap(), c.ground(text, &scene()).unwrap());
    }

    #[test]
    fn longest_match_wins() {
        let cmd = catalog().ground("place the cup on the right side of the plate", &scene()).unwrap();
        assert_eq!(cmd.relation.id, "right_of");
        assert_eq!((cmd.target.as_str(), cmd.references.as_slice()), ("cup", &["plate".to_owned()][..]));
        let cmd = catalog().ground("put the cereal box on the other side of the cup", &scene()).unwrap();
        assert_eq!(cmd.relation.id, "on_the_other_side_of");
        assert_eq!(cmd.target, "cereal_box");
    }

    #[test]
    fn repeated_mentions_bind_left_to_right() {
        let cmd = catalog().ground("put the cup near the plate, the cup!", &scene()).unwrap();
        assert_eq!(cmd.target, "cup");
        assert_eq!(cmd.references, vec!["plate"]);
    }

    #[test]
    fn conflicting_relations_are_ambiguous() {
        let err = catalog().ground("put the cup behind the plate far from the fork", &scene()).unwrap_err();
        assert!(matches!(err, GroundingError::AmbiguousMatch { .. }));
    }

    #[test]
    fn catalog_ambiguity_guard() {
        let objects =
            BTreeMap::from([("a".to_owned(), vec!["red cup".to_owned()]), ("b".to_owned(), vec!["cup".to_owned()])]);
        assert!(matches!(
            GroundingCatalog::new(objects, standard_relation_phrases()),
            Err(GroundingError::InvalidCatalog(_))
        ));
        let same_id = BTreeMap::from([("a".to_owned(), vec!["red cup".to_owned(), "cup".to_owned()])]);
        assert!(GroundingCatalog::new(same_id, standard_relation_phrases()).is_ok());
        let empty = BTreeMap::from([("a".to_owned(), vec!["  ".to_owned()])]);
        assert!(GroundingCatalog::new(empty, standard_relation_phrases()).is_err());
    }

    #[test]
    fn sentence_templates_ground_back() {
        let c = catalog();
        let ids = ["tea", "cup", "plate", "fork", "spoon", "cereal_box"];
        for rel in c.relations() {
            for (i, target) in ids.iter().enumerate() {
                for n_refs in 1..=3 {
                    let refs: Vec<String> =
                        ids.iter().cycle().skip(i + 1).take(n_refs).map(|s| (*s).to_owned()).collect();
                    let cmd = RelationCommand::new(rel.clone(), *target, refs).unwrap();
                    for variant in 0..3 {
                        let text = c.sentence(&cmd, variant).unwrap();
                        assert_eq!(c.ground(&text, &scene()).unwrap(), cmd, "{text}");
                    }
                }
            }
        }
    }

    #[test]
    fn query_templates() {
        let right = RelationSymbol::new("right_of", "right");
        assert_eq!(
            verbalize_query(QueryKind::NoModel, &right),
            "I am sorry, I don't know what 'right' means yet, can you show me what to do?"
        );
        assert_eq!(
            verbalize_query(QueryKind::InsufficientModel, &right),
            "Sorry, I cannot do it with my current knowledge. Can you show me what I should do?"
        );
        assert_eq!(
            verbalize_query(QueryKind::Thanks, &right),
            "Thanks, I think I now know the meaning of 'right' a bit better."
        );
    }

    #[test]
    fn catalog_json_round_trip() {
        let c = catalog();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("catalog.json");
        std::fs::write(&path, c.to_json()).unwrap();
        let back = GroundingCatalog::load(&path).unwrap();
        assert_eq!(back.to_json(), c.to_json());
        assert_eq!(back.relation("right_of").unwrap().display_name, "right");
    }
}
