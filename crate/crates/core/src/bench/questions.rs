use std::collections::{BTreeMap, BTreeSet};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::answer::AnswerGrammar;
use crate::error::{Error, Result};
use crate::kb::{CharacterInstance, GlyphClassId, KbSnapshot};
use crate::raster::RasterImage;
use crate::synth::{rng_for, single_crop_region};
use crate::vision::Modality;

pub const SYSTEM_CLASSIFY: &str =
    "You are a senior oracle bone researcher who excels in classifying oracle bone characters.";
pub const SYSTEM_MODALITY: &str =
    "You are a senior oracle bone researcher who excels in classifying the modality of oracle bone images.";
pub const SYSTEM_DETECT: &str =
    "You are a senior oracle bone researcher who excels in detecting characters on oracle bone script images.";
pub const SYSTEM_RETRIEVE: &str =
    "You are a senior oracle bone researcher who excels in retrieving oracle bone characters.";

pub const PROMPT_PAIR_HOW: &str = "Given the following two oracle bone characters, estimate the probability that they belong to the same class. Please return only a single integer between 0 and 100. <image1> <image2>";
pub const PROMPT_PAIR_YES_NO: &str = "Whether these two oracle bone characters belong to the same class? Please return \"Yes\" or \"No\". <image1> <image2>";
pub const PROMPT_MODALITY: &str = "Which modality is this oracle bone image belong to? <image1>";
pub const MODALITY_OPTIONS: [&str; 4] = [
    "A. Whole Rubbing Image.",
    "B. Whole Facsimile Image.",
    "C. Single Character Rubbing Image.",
    "D. Single Character Facsimile Image.",
];
pub const PROMPT_DETECT_HOW: &str = "How many oracle bone characters are in this image? Please return the number of oracle bone characters in this image. <image1>";
pub const PROMPT_DETECT_WHERE: &str = "How many oracle bone characters are in this image? For each detected oracle bone character, please return a bounding box in [xmin, ymin, xmax, ymax] format. <image1>";
pub const PROMPT_GENERATE: &str = "Please transform this picture into a facsimile.";
pub const PROMPT_OCCURRENCES: &str = "Find every oracle bone fragment on which this character appears. Please return a JSON list of fragment IDs with one entry per occurrence. <image1>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Retrieval,
    Classification,
    Detection,
    Modality,
    Generation,
    CaseRetrieval,
}

impl Task {
    pub const ALL: [Task; 6] = [
        Task::Retrieval,
        Task::Classification,
        Task::Detection,
        Task::Modality,
        Task::Generation,
        Task::CaseRetrieval,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Retrieval => "retrieval",
            Task::Classification => "classification",
            Task::Detection => "detection",
            Task::Modality => "modality",
            Task::Generation => "generation",
            Task::CaseRetrieval => "case-retrieval",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Task::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::argument(format!("unknown task {s:?}")))
    }
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Question form. `List` asks for every occurrence of a character.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QType {
    YesNo,
    Which,
    How,
    Where,
    Generate,
    List,
}

impl QType {
    pub fn as_str(self) -> &'static str {
        match self {
            QType::YesNo => "yes-no",
            QType::Which => "which",
            QType::How => "how",
            QType::Where => "where",
            QType::Generate => "generate",
            QType::List => "list",
        }
    }
}

/// Position of a pair question inside its candidate group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupRef {
    pub group_id: String,
    pub candidate_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Truth {
    SameClass { same: bool },
    Modality { modality: Modality },
    Count { count: u32 },
    Boxes { boxes: Vec<[u32; 4]> },
    /// Key of the target image in the question set.
    Image { image: String },
    Occurrences { instances: Vec<String>, categories: BTreeSet<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionInstance {
    pub qid: String,
    pub task: Task,
    pub qtype: QType,
    pub system: String,
    /// Template text with `<imageN>` placeholders left in place.
    pub prompt: String,
    /// Keys into [`QuestionSet::images`], in placeholder order.
    pub images: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<GroupRef>,
    pub truth: Truth,
}

impl QuestionInstance {
    pub fn grammar(&self) -> AnswerGrammar {
        match self.qtype {
            QType::YesNo => AnswerGrammar::YesNo,
            QType::Which => AnswerGrammar::Option { last: 'D' },
            QType::How if self.task == Task::Detection => AnswerGrammar::Integer { max: None },
            QType::How => AnswerGrammar::Integer { max: Some(100) },
            QType::Where => AnswerGrammar::Boxes,
            QType::Generate => AnswerGrammar::Image,
            QType::List => AnswerGrammar::Items,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct QuestionSet {
    pub seed: u64,
    pub questions: Vec<QuestionInstance>,
    pub images: BTreeMap<String, RasterImage>,
}

impl QuestionSet {
    pub fn extend(&mut self, other: QuestionSet) {
        self.questions.extend(other.questions);
        self.images.extend(other.images);
        self.questions.sort_by(|a, b| a.qid.cmp(&b.qid));
    }

    pub fn image(&self, key: &str) -> Result<&RasterImage> {
        self.images.get(key).ok_or_else(|| Error::not_found("image", key))
    }
}

struct Builder<'a> {
    kb: &'a KbSnapshot,
    set: QuestionSet,
}

impl Builder<'_> {
    fn kb_image(&mut self, key: &str) -> Result<String> {
        if !self.set.images.contains_key(key) {
            let img = self.kb.image(key).ok_or_else(|| Error::not_found("image", key))?;
            self.set.images.insert(key.to_string(), img.clone());
        }
        Ok(key.to_string())
    }

    fn push(&mut self, q: QuestionInstance) {
        self.set.questions.push(q);
    }
}

fn insufficient(task: Task, what: &str, need: usize, have: usize) -> Error {
    Error::argument(format!(
        "{task} questions need at least {need} {what}, the corpus has {have}"
    ))
}

/// Builds `n` questions of `task` from a snapshot, deterministically in
/// `seed`. Questions come back sorted by qid.
///
/// Sizes: retrieval emits `n` yes-no and `n` how pair questions in groups of
/// one positive and one negative candidate (`n` even); classification emits
/// `n` balanced yes-no pairs plus `ceil(n / classes)` how-groups scoring the
/// query against one standard image per class; detection emits a how and a
/// where question for each of `n` rubbings; modality cycles the four
/// modalities over `n` images; generation and case retrieval emit `n`.
pub fn generate_questions(kb: &KbSnapshot, task: Task, n: usize, seed: u64) -> Result<QuestionSet> {
    if n == 0 {
        return Err(Error::argument("question count must be positive"));
    }
    let mut rng = rng_for(seed, &format!("questions/{task}"), 0);
    let mut b = Builder {
        kb,
        set: QuestionSet {
            seed,
            ..QuestionSet::default()
        },
    };
    let classes: Vec<GlyphClassId> = kb.class_ids();
    let labelled: Vec<&CharacterInstance> = kb
        .stores()
        .characters
        .values()
        .filter(|c| c.glyph_class.is_some())
        .collect();
    let class_of = |c: &CharacterInstance| c.glyph_class.clone().expect("filtered");
    let fragments = kb.fragment_ids();

    match task {
        Task::Retrieval => {
            if !n.is_multiple_of(2) {
                return Err(Error::argument("retrieval needs an even question count"));
            }
            let multi: Vec<&CharacterInstance> = labelled
                .iter()
                .copied()
                .filter(|c| kb.class_instances(&class_of(c)).len() >= 2)
                .collect();
            let distinct: BTreeSet<GlyphClassId> = labelled.iter().map(|c| class_of(c)).collect();
            if multi.is_empty() || distinct.len() < 2 {
                return Err(insufficient(task, "classes with two instances", 2, distinct.len()));
            }
            for g in 0..n / 2 {
                let query = *multi.choose(&mut rng).expect("non-empty");
                let class = class_of(query);
                let same: Vec<&&CharacterInstance> = labelled
                    .iter()
                    .filter(|c| class_of(c) == class && c.instance_id != query.instance_id)
                    .collect();
                let other: Vec<&&CharacterInstance> =
                    labelled.iter().filter(|c| class_of(c) != class).collect();
                let pos = **same.choose(&mut rng).expect("class has two instances");
                let neg = **other.choose(&mut rng).expect("two classes");
                let group_id = format!("ret-{g:04}");
                let q_img = b.kb_image(&query.crop_ref)?;
                for (cand, is_same) in [(pos, true), (neg, false)] {
                    let c_img = b.kb_image(&cand.crop_ref)?;
                    for (qtype, prompt, tag) in [
                        (QType::YesNo, PROMPT_PAIR_YES_NO, "yn"),
                        (QType::How, PROMPT_PAIR_HOW, "how"),
                    ] {
                        b.push(QuestionInstance {
                            qid: format!("{group_id}-{tag}-{}", cand.instance_id),
                            task,
                            qtype,
                            system: SYSTEM_CLASSIFY.into(),
                            prompt: prompt.into(),
                            images: vec![q_img.clone(), c_img.clone()],
                            group: Some(GroupRef {
                                group_id: format!("{group_id}-{tag}"),
                                candidate_id: cand.instance_id.clone(),
                            }),
                            truth: Truth::SameClass { same: is_same },
                        });
                    }
                }
            }
        }
        Task::Classification => {
            if !n.is_multiple_of(2) {
                return Err(Error::argument("classification needs an even question count"));
            }
            if classes.len() < 2 || labelled.is_empty() {
                return Err(insufficient(task, "glyph classes", 2, classes.len()));
            }
            let standard = |rng: &mut rand_chacha::ChaCha8Rng, class: &GlyphClassId| -> Result<String> {
                let refs: Vec<&String> = kb
                    .glyph_class(class)
                    .into_iter()
                    .flat_map(|e| e.standard_image_refs.iter())
                    .collect();
                refs.choose(rng)
                    .map(|s| s.to_string())
                    .ok_or_else(|| Error::not_found("standard image", class.as_str()))
            };
            let mut kinds: Vec<bool> = (0..n).map(|i| i < n / 2).collect();
            kinds.shuffle(&mut rng);
            for (i, same) in kinds.into_iter().enumerate() {
                let query = *labelled.choose(&mut rng).expect("non-empty");
                let class = class_of(query);
                let target = if same {
                    class.clone()
                } else {
                    let others: Vec<&GlyphClassId> = classes.iter().filter(|c| **c != class).collect();
                    (*others.choose(&mut rng).expect("two classes")).clone()
                };
                let s = standard(&mut rng, &target)?;
                let images = vec![b.kb_image(&query.crop_ref)?, b.kb_image(&s)?];
                b.push(QuestionInstance {
                    qid: format!("cls-yn-{i:04}"),
                    task,
                    qtype: QType::YesNo,
                    system: SYSTEM_CLASSIFY.into(),
                    prompt: PROMPT_PAIR_YES_NO.into(),
                    images,
                    group: None,
                    truth: Truth::SameClass { same },
                });
            }
            for g in 0..n.div_ceil(classes.len()) {
                let query = *labelled.choose(&mut rng).expect("non-empty");
                let truth_class = class_of(query);
                let q_img = b.kb_image(&query.crop_ref)?;
                for class in &classes {
                    let s = standard(&mut rng, class)?;
                    let images = vec![q_img.clone(), b.kb_image(&s)?];
                    b.push(QuestionInstance {
                        qid: format!("cls-how-{g:04}-{class}"),
                        task,
                        qtype: QType::How,
                        system: SYSTEM_CLASSIFY.into(),
                        prompt: PROMPT_PAIR_HOW.into(),
                        images,
                        group: Some(GroupRef {
                            group_id: format!("cls-how-{g:04}"),
                            candidate_id: class.to_string(),
                        }),
                        truth: Truth::SameClass { same: *class == truth_class },
                    });
                }
            }
        }
        Task::Detection | Task::Generation => {
            let with_both: Vec<_> = fragments
                .iter()
                .filter(|f| {
                    kb.stores().rubbings.contains_key(*f)
                        && (task == Task::Detection || kb.stores().facsimiles.contains_key(*f))
                })
                .collect();
            if with_both.len() < n {
                return Err(insufficient(task, "rubbings", n, with_both.len()));
            }
            let picked: Vec<_> = with_both.choose_multiple(&mut rng, n).collect();
            for (i, f) in picked.into_iter().enumerate() {
                let bundle = kb.lookup_fragment(f)?;
                let rubbing = bundle.rubbing.expect("filtered");
                let img = b.kb_image(&rubbing.image_ref)?;
                if task == Task::Generation {
                    let target = b.kb_image(&bundle.facsimile.expect("filtered").image_ref)?;
                    b.push(QuestionInstance {
                        qid: format!("gen-{i:04}"),
                        task,
                        qtype: QType::Generate,
                        system: String::new(),
                        prompt: PROMPT_GENERATE.into(),
                        images: vec![img],
                        group: None,
                        truth: Truth::Image { image: target },
                    });
                    continue;
                }
                let boxes: Vec<[u32; 4]> = bundle.characters.iter().map(|c| c.bbox.to_array()).collect();
                b.push(QuestionInstance {
                    qid: format!("det-{i:04}-how"),
                    task,
                    qtype: QType::How,
                    system: SYSTEM_DETECT.into(),
                    prompt: PROMPT_DETECT_HOW.into(),
                    images: vec![img.clone()],
                    group: None,
                    truth: Truth::Count {
                        count: boxes.len() as u32,
                    },
                });
                b.push(QuestionInstance {
                    qid: format!("det-{i:04}-where"),
                    task,
                    qtype: QType::Where,
                    system: SYSTEM_DETECT.into(),
                    prompt: PROMPT_DETECT_WHERE.into(),
                    images: vec![img],
                    group: None,
                    truth: Truth::Boxes { boxes },
                });
            }
        }
        Task::Modality => {
            let per = n.div_ceil(4);
            let rubbings: Vec<_> = kb.stores().rubbings.values().collect();
            let facsimiles: Vec<_> = kb.stores().facsimiles.values().collect();
            let chars: Vec<&CharacterInstance> = kb.stores().characters.values().collect();
            let have = rubbings.len().min(facsimiles.len()).min(chars.len());
            if have < per {
                return Err(insufficient(task, "images of each modality", per, have));
            }
            let mut pools: [Vec<usize>; 4] = [
                sample_indices(&mut rng, rubbings.len(), per),
                sample_indices(&mut rng, facsimiles.len(), per),
                sample_indices(&mut rng, chars.len(), per),
                sample_indices(&mut rng, chars.len(), per),
            ];
            for i in 0..n {
                let modality = Modality::ALL[i % 4];
                let pick = pools[i % 4].pop().expect("sized above");
                let key = match modality {
                    Modality::WholeRubbing => b.kb_image(&rubbings[pick].image_ref)?,
                    Modality::WholeFacsimile => b.kb_image(&facsimiles[pick].image_ref)?,
                    Modality::SingleRubbing => b.kb_image(&chars[pick].crop_ref)?,
                    Modality::SingleFacsimile => {
                        let c = chars[pick];
                        let fac = kb
                            .stores()
                            .facsimiles
                            .get(&c.fragment_id)
                            .ok_or_else(|| Error::not_found("facsimile", c.fragment_id.as_str()))?;
                        let whole = kb
                            .image(&fac.image_ref)
                            .ok_or_else(|| Error::not_found("image", &fac.image_ref))?;
                        let crop = whole.crop(&single_crop_region(&c.bbox, &whole.bounds()))?;
                        let key = format!("derived/single-facsimile/{}.png", c.instance_id);
                        b.set.images.insert(key.clone(), crop);
                        key
                    }
                };
                let mut prompt = PROMPT_MODALITY.to_string();
                for opt in MODALITY_OPTIONS {
                    prompt.push('\n');
                    prompt.push_str(opt);
                }
                b.push(QuestionInstance {
                    qid: format!("mod-{i:04}"),
                    task,
                    qtype: QType::Which,
                    system: SYSTEM_MODALITY.into(),
                    prompt,
                    images: vec![key],
                    group: None,
                    truth: Truth::Modality { modality },
                });
            }
        }
        Task::CaseRetrieval => {
            let with_instances: Vec<&GlyphClassId> = classes
                .iter()
                .filter(|c| !kb.class_instances(c).is_empty() && !kb.glyph_class(c).is_empty())
                .collect();
            if with_instances.len() < n {
                return Err(insufficient(task, "classes with instances", n, with_instances.len()));
            }
            let picked: Vec<_> = with_instances.choose_multiple(&mut rng, n).copied().collect();
            for (i, class) in picked.into_iter().enumerate() {
                let entry = kb.glyph_class(class)[0];
                let img = b.kb_image(&entry.standard_image_refs[0])?;
                let instances: Vec<String> = kb
                    .class_instances(class)
                    .iter()
                    .map(|c| c.fragment_id.to_string())
                    .collect();
                let categories = instances.iter().cloned().collect();
                b.push(QuestionInstance {
                    qid: format!("case-{i:04}"),
                    task,
                    qtype: QType::List,
                    system: SYSTEM_RETRIEVE.into(),
                    prompt: PROMPT_OCCURRENCES.into(),
                    images: vec![img],
                    group: None,
                    truth: Truth::Occurrences {
                        instances,
                        categories,
                    },
                });
            }
        }
    }
    b.set.questions.sort_by(|a, b| a.qid.cmp(&b.qid));
    Ok(b.set)
}

fn sample_indices(rng: &mut impl Rng, len: usize, n: usize) -> Vec<usize> {
    rand::seq::index::sample(rng, len, n).into_vec()
}
