//! One identity provider and any number of service providers on loopback
//! ports, wired together the way a deployment would be.

use std::sync::Arc;

use bison_core::group::PrimeGroup;
use bison_core::token::TokenSigner;
use url::Url;

use crate::idp::{IdentityProvider, IdpConfig, UserTable};
use crate::sp::{ServiceProvider, SetupError, SpConfig};
use crate::{Bound, Server};

/// How to configure one service provider.
#[derive(Debug, Clone, Default)]
pub struct SpSpec {
    /// Audience override; `None` uses the origin.
    pub audience: Option<String>,
    /// Leave out the blinded-derivation opt-in.
    pub plain: bool,
    pub sp_samples_blind: bool,
}

impl SpSpec {
    pub fn with_audience(audience: impl Into<String>) -> Self {
        Self {
            audience: Some(audience.into()),
            ..Self::default()
        }
    }

    pub fn plain() -> Self {
        Self {
            plain: true,
            ..Self::default()
        }
    }
}

pub struct RunningSp<G: PrimeGroup> {
    pub sp: Arc<ServiceProvider<G>>,
    pub server: Server,
}

impl<G: PrimeGroup> RunningSp<G> {
    pub fn url(&self) -> &Url {
        self.server.url()
    }
}

pub struct Testbed<G: PrimeGroup> {
    pub idp: Arc<IdentityProvider<G>>,
    pub idp_server: Server,
    pub sps: Vec<RunningSp<G>>,
}

#[derive(Debug, thiserror::Error)]
pub enum LaunchError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Setup(#[from] SetupError),
}

impl<G: PrimeGroup> Testbed<G> {
    /// Starts the identity provider with a fresh signing key, then each
    /// service provider, which fetches discovery on startup.
    pub async fn launch(users: UserTable, sps: &[SpSpec]) -> Result<Self, LaunchError> {
        let idp_bound = Bound::loopback().await?;
        let signer = TokenSigner::generate(&mut rand::rngs::OsRng, "idp-key-1");
        let idp = Arc::new(IdentityProvider::new(
            IdpConfig::new(idp_bound.url().clone()),
            users,
            signer,
        ));
        let idp_url = idp_bound.url().clone();
        let idp_server = idp_bound.serve(idp.clone().router());

        let mut running = Vec::with_capacity(sps.len());
        for spec in sps {
            let bound = Bound::loopback().await?;
            let mut config = SpConfig::new(bound.url());
            config.audience = spec.audience.clone();
            config.bison = !spec.plain;
            config.sp_samples_blind = spec.sp_samples_blind;
            idp.register_client(config.origin.clone(), config.redirect_uri());
            let sp = Arc::new(ServiceProvider::<G>::connect(config, &idp_url).await?);
            let server = bound.serve(sp.clone().router());
            running.push(RunningSp { sp, server });
        }
        Ok(Self {
            idp,
            idp_server,
            sps: running,
        })
    }

    pub fn idp_url(&self) -> &Url {
        self.idp_server.url()
    }

    pub fn sp_url(&self, i: usize) -> &Url {
        self.sps[i].url()
    }

    pub fn sp(&self, i: usize) -> &Arc<ServiceProvider<G>> {
        &self.sps[i].sp
    }
}
