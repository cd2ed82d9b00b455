use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::corpus::{non_empty, FieldError, HeadlineSet, Record};
use crate::textmetrics::{cosine, EmbeddingProvider, EmbeddingVector};

/// A user described by free text, a precomputed vector, or both. The vector
/// wins when both are present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserProfile {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vector: Option<Vec<f64>>,
}

impl UserProfile {
    pub fn from_text(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: Some(text.into()),
            vector: None,
        }
    }

    pub fn from_vector(id: impl Into<String>, vector: Vec<f64>) -> Self {
        Self {
            id: id.into(),
            text: None,
            vector: Some(vector),
        }
    }

    pub fn embedding(
        &self,
        provider: &dyn EmbeddingProvider,
    ) -> Result<EmbeddingVector, HarnessError> {
        match (&self.vector, &self.text) {
            (Some(v), _) => Ok(EmbeddingVector::new(v.clone())?),
            (None, Some(t)) if !t.trim().is_empty() => Ok(provider.embed(t)?),
            _ => Err(HarnessError::EmptyProfile(self.id.clone())),
        }
    }
}

impl Record for UserProfile {
    fn validate(&self) -> Result<(), FieldError> {
        non_empty("id", &self.id)?;
        let has_text = self.text.as_deref().is_some_and(|t| !t.trim().is_empty());
        if !has_text && self.vector.is_none() {
            return Err(FieldError::new("text", "one of text or vector is required"));
        }
        Ok(())
    }

    fn unique_key(&self) -> Option<&str> {
        Some(&self.id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub profile_id: String,
    pub ad_id: String,
    pub index: usize,
    pub headline: String,
    pub similarity: f64,
}

impl Record for Selection {
    fn validate(&self) -> Result<(), FieldError> {
        non_empty("headline", &self.headline)
    }
}

/// The headline whose embedding has the highest cosine with the profile;
/// the earliest one wins ties.
pub fn select_for_profile(
    set: &HeadlineSet,
    profile: &UserProfile,
    provider: &dyn EmbeddingProvider,
) -> Result<Selection, HarnessError> {
    if set.headlines.is_empty() {
        return Err(HarnessError::EmptySet);
    }
    let target = profile.embedding(provider)?;
    let mut best: Option<(usize, f64)> = None;
    for (i, h) in set.headlines.iter().enumerate() {
        let sim = cosine(&provider.embed(h)?, &target)?;
        if best.is_none_or(|(_, b)| sim > b) {
            best = Some((i, sim));
        }
    }
    let (index, similarity) = best.expect("set is non-empty");
    Ok(Selection {
        profile_id: profile.id.clone(),
        ad_id: set.ad_id.clone(),
        index,
        headline: set.headlines[index].clone(),
        similarity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textmetrics::HashedBigramProvider;

    fn set(h: &[&str]) -> HeadlineSet {
        HeadlineSet::canonical("ad", h.iter().map(|s| s.to_string()).collect(), 6)
    }

    #[test]
    fn single_headline_is_selected() {
        let p = HashedBigramProvider::default();
        let s =
            select_for_profile(&set(&["唯一"]), &UserProfile::from_text("u", "跑步"), &p).unwrap();
        assert_eq!(s.index, 0);
    }

    #[test]
    fn exact_embedding_wins() {
        let p = HashedBigramProvider::default();
        let s = set(&["登山鞋", "羽绒服保暖", "蓝牙耳机"]);
        let v = p.embed("羽绒服保暖").unwrap();
        let profile = UserProfile::from_vector("u", v.values().to_vec());
        let sel = select_for_profile(&s, &profile, &p).unwrap();
        assert_eq!((sel.index, sel.similarity), (1, 1.0));
        let scaled = UserProfile::from_vector("u", v.scaled(7.5).unwrap().values().to_vec());
        assert_eq!(select_for_profile(&s, &scaled, &p).unwrap().index, 1);
    }

    #[test]
    fn ties_go_to_first() {
        let p = HashedBigramProvider::default();
        let sel = select_for_profile(
            &set(&["同款", "同款"]),
            &UserProfile::from_text("u", "同款"),
            &p,
        )
        .unwrap();
        assert_eq!(sel.index, 0);
    }

    #[test]
    fn errors() {
        let p = HashedBigramProvider::default();
        assert!(matches!(
            select_for_profile(&set(&[]), &UserProfile::from_text("u", "x"), &p),
            Err(HarnessError::EmptySet)
        ));
        let empty = UserProfile {
            id: "u".into(),
            text: None,
            vector: None,
        };
        assert!(empty.validate().is_err());
        assert!(select_for_profile(&set(&["a"]), &empty, &p).is_err());
    }
}
