//! Text embeddings: a deterministic hashed character-trigram fallback and an
//! OpenAI-compatible remote client.

use std::time::Duration;

use super::LlmError;

pub const TRIGRAM_DIM: usize = 256;

pub trait Embedder: Send + Sync {
    fn embed(&self, text: &str) -> Result<Vec<f64>, LlmError>;
}

/// L2-normalized frequency vector of lowercase character trigrams hashed into
/// [`TRIGRAM_DIM`] buckets with FNV-1a.
#[derive(Debug, Default, Clone, Copy)]
pub struct TrigramEmbedder;

impl Embedder for TrigramEmbedder {
    fn embed(&self, text: &str) -> Result<Vec<f64>, LlmError> {
        Ok(trigram_embedding(text))
    }
}

pub fn trigram_embedding(text: &str) -> Vec<f64> {
    let mut v = vec![0.0; TRIGRAM_DIM];
    for gram in trigrams(text) {
        v[bucket(&gram)] += 1.0;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

/// Overlapping character trigrams of the lowercased text. Texts shorter than
/// three characters yield themselves as a single gram.
pub fn trigrams(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.to_lowercase().chars().collect();
    if chars.is_empty() {
        return Vec::new();
    }
    if chars.len() < 3 {
        return vec![chars.iter().collect()];
    }
    chars.windows(3).map(|w| w.iter().collect()).collect()
}

fn bucket(gram: &str) -> usize {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in gram.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    (h % TRIGRAM_DIM as u64) as usize
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// `POST {endpoint}` with `{model, input}`; reads `data[0].embedding`.
pub struct RemoteEmbedder {
    endpoint: String,
    api_key: Option<String>,
    model: String,
    agent: ureq::Agent,
}

impl RemoteEmbedder {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>, model: impl Into<String>) -> Self {
        let agent = ureq::AgentBuilder::new().timeout(Duration::from_secs(60)).build();
        RemoteEmbedder { endpoint: endpoint.into(), api_key, model: model.into(), agent }
    }
}

impl Embedder for RemoteEmbedder {
    fn embed(&self, text: &str) -> Result<Vec<f64>, LlmError> {
        let mut req = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            req = req.set("Authorization", &format!("Bearer {key}"));
        }
        let body = serde_json::json!({ "model": self.model, "input": text });
        let resp = req.send_json(body).map_err(super::remote::map_ureq_error)?;
        let json: serde_json::Value = resp.into_json().map_err(|e| LlmError::Transport(e.to_string()))?;
        json["data"][0]["embedding"]
            .as_array()
            .map(|a| a.iter().filter_map(serde_json::Value::as_f64).collect())
            .ok_or_else(|| LlmError::Provider(format!("embedding response without data: {json}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    // Exact (unhashed) trigram cosine, used as an independent check.
    fn exact_cosine(a: &str, b: &str) -> f64 {
        let count = |s: &str| {
            let mut m: HashMap<String, f64> = HashMap::new();
            let chars: Vec<char> = s.chars().collect();
            for i in 0..chars.len().saturating_sub(2) {
                *m.entry(chars[i..i + 3].iter().collect()).or_default() += 1.0;
            }
            m
        };
        let (ca, cb) = (count(a), count(b));
        let dot: f64 = ca.iter().map(|(k, v)| v * cb.get(k).copied().unwrap_or(0.0)).sum();
        let na: f64 = ca.values().map(|v| v * v).sum::<f64>().sqrt();
        let nb: f64 = cb.values().map(|v| v * v).sum::<f64>().sqrt();
        dot / (na * nb)
    }

    #[test]
    fn self_cosine_is_one() {
        let e = trigram_embedding("weather station readings");
        assert!((cosine(&e, &e) - 1.0).abs() < 1e-6);
        let dot: f64 = e.iter().map(|x| x * x).sum();
        assert!((dot - 1.0).abs() < 1e-6);
    }

    #[test]
    fn deterministic() {
        assert_eq!(trigram_embedding("abc"), trigram_embedding("abc"));
        assert_eq!(trigrams("ab"), vec!["ab".to_string()]);
        assert!(trigram_embedding("").iter().all(|x| *x == 0.0));
    }

    #[test]
    fn shared_words_are_closer() {
        let (a, b, c) = ("temperature humidity", "temperature pressure", "order invoice id");
        let exact_ab = exact_cosine(a, b);
        let exact_ac = exact_cosine(a, c);
        assert!(exact_ab > exact_ac);
        // "temperature " contributes 10 shared grams; the third string shares none
        assert_eq!(exact_ac, 0.0);
        let (ea, eb, ec) = (trigram_embedding(a), trigram_embedding(b), trigram_embedding(c));
        assert!(cosine(&ea, &eb) > cosine(&ea, &ec));
    }
}
