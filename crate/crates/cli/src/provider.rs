use std::sync::Arc;

use anyhow::{bail, Context, Result};

use sdq_core::embed::remote::{RemoteConfig, RemoteProvider};
use sdq_core::embed::{
    CachedProvider, EmbeddingCache, EmbeddingProvider, OfflineProvider, StubEmbedder,
};

use crate::config::{ProviderConfig, ProviderKind};

/// The configured embedding provider and, when caching, its cache.
pub struct Provider {
    pub inner: Box<dyn EmbeddingProvider>,
    pub cache: Option<Arc<EmbeddingCache>>,
}

impl Provider {
    pub fn id(&self) -> &str {
        self.inner.id()
    }

    pub fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    pub fn as_dyn(&self) -> &dyn EmbeddingProvider {
        self.inner.as_ref()
    }

    /// Persists new cache entries and reports cache usage on stderr.
    pub fn finish(&self) -> Result<()> {
        if let Some(cache) = &self.cache {
            cache.flush().context("flushing embedding cache")?;
            let loaded = cache.load_report().loaded;
            eprintln!(
                "embedding cache: {} entries ({} loaded at start)",
                cache.len(),
                loaded
            );
        }
        Ok(())
    }
}

fn remote_id(cfg: &ProviderConfig) -> Option<String> {
    let model = cfg.model_id.as_deref()?;
    Some(match cfg.revision.as_deref().filter(|r| !r.is_empty()) {
        Some(rev) => format!("remote:{model}@{rev}"),
        None => format!("remote:{model}"),
    })
}

fn open_cache(cfg: &ProviderConfig, dimension: usize) -> Result<Option<Arc<EmbeddingCache>>> {
    let Some(path) = cfg.cache.as_deref().filter(|_| !cfg.no_cache) else {
        return Ok(None);
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(Some(Arc::new(EmbeddingCache::open(path, dimension)?)))
}

fn wrap(inner: Box<dyn EmbeddingProvider>, cache: Option<Arc<EmbeddingCache>>) -> Result<Provider> {
    Ok(match cache {
        Some(c) => Provider {
            inner: Box::new(CachedProvider::new(inner, c.clone())?),
            cache: Some(c),
        },
        None => Provider { inner, cache: None },
    })
}

pub fn build_provider(cfg: &ProviderConfig) -> Result<Provider> {
    match cfg.kind {
        ProviderKind::Stub => {
            let stub = StubEmbedder::with_dimension(cfg.stub_seed, cfg.dimension);
            let cache = open_cache(cfg, cfg.dimension)?;
            wrap(Box::new(stub), cache)
        }
        ProviderKind::Remote if cfg.no_network => {
            let name = remote_id(cfg).unwrap_or_else(|| "remote".into());
            let cache_path = cfg
                .cache
                .as_deref()
                .filter(|p| !cfg.no_cache && p.is_file());
            let Some(path) = cache_path else {
                bail!("provider {name}: network disabled and no embedding cache to read from");
            };
            let Some(id) = remote_id(cfg) else {
                bail!("provider {name}: offline use needs provider.model_id to address the cache");
            };
            let offline = OfflineProvider {
                id,
                dimension: cfg.dimension,
                token_budget: cfg.max_tokens,
                reason: format!(
                    "network disabled; text not found in cache {}",
                    path.display()
                ),
            };
            let cache = open_cache(cfg, cfg.dimension)?;
            wrap(Box::new(offline), cache)
        }
        ProviderKind::Remote => {
            let endpoint = cfg
                .endpoint
                .as_deref()
                .context("provider remote: no endpoint configured (set provider.endpoint or pass --endpoint)")?;
            let remote = RemoteProvider::connect(RemoteConfig::new(endpoint))
                .with_context(|| format!("provider remote at {endpoint}"))?;
            let dimension = remote.dimension();
            let cache = open_cache(cfg, dimension)?;
            wrap(Box::new(remote), cache)
        }
    }
}
