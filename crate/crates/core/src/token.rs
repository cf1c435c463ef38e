//! Signed ID tokens.
//!
//! Compact serialization: `base64url(header) . base64url(claims) .
//! base64url(signature)`, with the signature computed over the first two
//! segments. Header and claims are serialized with sorted keys and no
//! insignificant whitespace, so a given claim set always has exactly one
//! encoding. The default (and currently only) signature scheme is Ed25519,
//! which is deterministic.

use ed25519_dalek::{Signature, Signer, SigningKey, Verifier, VerifyingKey};
use rand_core::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};

use crate::encoding::{self, b64url, b64url_decode};
use crate::group::PrimeGroup;

/// Marker value of `pairwise_subject_type` for blinded derivation.
pub const BISON_SUBJECT_TYPE: &str = "bison";
pub const DEFAULT_TOKEN_LIFETIME_SECS: u64 = 300;
/// Tolerated clock skew for tokens issued slightly in the future.
pub const CLOCK_SKEW_SECS: u64 = 60;

const ALG_EDDSA: &str = "EdDSA";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TokenError {
    #[error("malformed token: {0}")]
    MalformedToken(String),
    #[error("signature verification failed")]
    BadSignature,
    #[error("token expired")]
    Expired,
    #[error("token issued in the future")]
    IssuedInFuture,
    #[error("unexpected issuer {0:?}")]
    WrongIssuer(String),
    #[error("cannot issue token: {0}")]
    Issuance(String),
}

/// The claim set. Field order is alphabetical so that serde emits sorted
/// keys.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdTokenClaims {
    /// `base64url(A)` for blinded derivation, the client id otherwise.
    pub aud: String,
    pub exp: u64,
    pub iat: u64,
    pub iss: String,
    pub nonce: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairwise_subject_type: Option<String>,
    /// `base64url(B)` for blinded derivation, the PPID otherwise.
    pub sub: String,
}

impl IdTokenClaims {
    pub fn is_bison(&self) -> bool {
        self.pairwise_subject_type.as_deref() == Some(BISON_SUBJECT_TYPE)
    }

    /// Checks the structural invariants: `exp > iat`, and for blinded
    /// derivation `aud` and `sub` must be valid non-identity elements.
    pub fn validate<G: PrimeGroup>(&self) -> Result<(), TokenError> {
        if self.exp <= self.iat {
            return Err(TokenError::MalformedToken("exp must exceed iat".into()));
        }
        if self.is_bison() {
            encoding::element_from_b64::<G>(&self.aud)
                .map_err(|e| TokenError::MalformedToken(format!("aud: {e}")))?;
            encoding::element_from_b64::<G>(&self.sub)
                .map_err(|e| TokenError::MalformedToken(format!("sub: {e}")))?;
        }
        Ok(())
    }

    /// Decodes the blinded pair carried in `aud` and `sub`.
    pub fn blinded_pair<G: PrimeGroup>(
        &self,
    ) -> Result<crate::derivation::BlindedPair<G>, TokenError> {
        let decode = |field: &str, v: &str| {
            encoding::element_from_b64::<G>(v)
                .map_err(|e| TokenError::MalformedToken(format!("{field}: {e}")))
        };
        Ok(crate::derivation::BlindedPair {
            blinded_audience: decode("aud", &self.aud)?,
            blinded_pseudonym: decode("sub", &self.sub)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TokenHeader {
    pub alg: String,
    pub kid: String,
    pub typ: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignedIdToken {
    pub header: TokenHeader,
    pub claims: IdTokenClaims,
    signing_input: String,
    signature: Vec<u8>,
}

impl SignedIdToken {
    /// The compact `header.claims.signature` form.
    pub fn compact(&self) -> String {
        format!("{}.{}", self.signing_input, b64url(&self.signature))
    }

    /// Splits and decodes a compact token without checking the signature.
    pub fn parse(compact: &str) -> Result<Self, TokenError> {
        let malformed = |m: &str| TokenError::MalformedToken(m.to_owned());
        let mut parts = compact.split('.');
        let (Some(h), Some(c), Some(s), None) =
            (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(malformed("expected three segments"));
        };
        let header: TokenHeader =
            serde_json::from_slice(&b64url_decode(h).map_err(|_| malformed("header encoding"))?)
                .map_err(|e| TokenError::MalformedToken(format!("header: {e}")))?;
        let claims: IdTokenClaims =
            serde_json::from_slice(&b64url_decode(c).map_err(|_| malformed("claims encoding"))?)
                .map_err(|e| TokenError::MalformedToken(format!("claims: {e}")))?;
        let signature = b64url_decode(s).map_err(|_| malformed("signature encoding"))?;
        Ok(Self {
            header,
            claims,
            signing_input: format!("{h}.{c}"),
            signature,
        })
    }
}

/// Serializes a value as compact JSON with sorted object keys.
fn canonical_json<T: Serialize>(value: &T) -> Result<String, serde_json::Error> {
    // serde_json::Value objects are BTreeMap-backed, which sorts the keys
    // regardless of struct field order.
    serde_json::to_string(&serde_json::to_value(value)?)
}

/// Signing half of an identity provider key pair.
pub struct TokenSigner {
    key: SigningKey,
    kid: String,
}

impl TokenSigner {
    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R, kid: impl Into<String>) -> Self {
        Self {
            key: SigningKey::generate(rng),
            kid: kid.into(),
        }
    }

    pub fn from_seed(seed: &[u8; 32], kid: impl Into<String>) -> Self {
        Self {
            key: SigningKey::from_bytes(seed),
            kid: kid.into(),
        }
    }

    pub fn kid(&self) -> &str {
        &self.kid
    }

    pub fn verification_key(&self) -> VerificationKey {
        VerificationKey {
            key: self.key.verifying_key(),
            kid: self.kid.clone(),
        }
    }
}

impl std::fmt::Debug for TokenSigner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TokenSigner")
            .field("kid", &self.kid)
            .finish_non_exhaustive()
    }
}

/// Public verification key, published as a JWK.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VerificationKey {
    key: VerifyingKey,
    kid: String,
}

impl VerificationKey {
    pub fn kid(&self) -> &str {
        &self.kid
    }

    pub fn to_jwk(&self) -> Jwk {
        Jwk {
            kty: "OKP".into(),
            crv: "Ed25519".into(),
            x: b64url(self.key.as_bytes()),
            kid: self.kid.clone(),
            alg: ALG_EDDSA.into(),
            key_use: "sig".into(),
        }
    }

    pub fn from_jwk(jwk: &Jwk) -> Result<Self, TokenError> {
        if jwk.kty != "OKP" || jwk.crv != "Ed25519" {
            return Err(TokenError::MalformedToken(format!(
                "unsupported key type {}/{}",
                jwk.kty, jwk.crv
            )));
        }
        let bytes: [u8; 32] = b64url_decode(&jwk.x)
            .ok()
            .and_then(|b| b.try_into().ok())
            .ok_or_else(|| TokenError::MalformedToken("bad key encoding".into()))?;
        let key = VerifyingKey::from_bytes(&bytes)
            .map_err(|e| TokenError::MalformedToken(format!("bad key: {e}")))?;
        Ok(Self {
            key,
            kid: jwk.kid.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Jwk {
    pub kty: String,
    pub crv: String,
    pub x: String,
    pub kid: String,
    pub alg: String,
    #[serde(rename = "use")]
    pub key_use: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct JwkSet {
    pub keys: Vec<Jwk>,
}

impl JwkSet {
    pub fn find(&self, kid: &str) -> Option<&Jwk> {
        self.keys.iter().find(|k| k.kid == kid)
    }
}

/// Validates the claim invariants, serializes canonically and signs.
pub fn issue_token<G: PrimeGroup>(
    claims: IdTokenClaims,
    signer: &TokenSigner,
) -> Result<SignedIdToken, TokenError> {
    claims
        .validate::<G>()
        .map_err(|e| TokenError::Issuance(e.to_string()))?;
    let header = TokenHeader {
        alg: ALG_EDDSA.into(),
        kid: signer.kid.clone(),
        typ: "JWT".into(),
    };
    let issuance = |e: serde_json::Error| TokenError::Issuance(e.to_string());
    let signing_input = format!(
        "{}.{}",
        b64url(canonical_json(&header).map_err(issuance)?.as_bytes()),
        b64url(canonical_json(&claims).map_err(issuance)?.as_bytes())
    );
    let signature = signer
        .key
        .sign(signing_input.as_bytes())
        .to_bytes()
        .to_vec();
    Ok(SignedIdToken {
        header,
        claims,
        signing_input,
        signature,
    })
}

/// Verifies a compact token and returns its claims.
///
/// Checks, in order: structure and claim invariants, signature, issuer,
/// then time (`iat` at most [`CLOCK_SKEW_SECS`] in the future, `now < exp`).
pub fn verify_token<G: PrimeGroup>(
    compact: &str,
    trusted_key: &VerificationKey,
    expected_issuer: &str,
    now: u64,
) -> Result<IdTokenClaims, TokenError> {
    let token = SignedIdToken::parse(compact)?;
    if token.header.alg != ALG_EDDSA {
        return Err(TokenError::MalformedToken(format!(
            "unsupported alg {}",
            token.header.alg
        )));
    }
    token.claims.validate::<G>()?;
    let signature =
        Signature::from_slice(&token.signature).map_err(|_| TokenError::BadSignature)?;
    if token.header.kid != trusted_key.kid {
        return Err(TokenError::BadSignature);
    }
    trusted_key
        .key
        .verify(token.signing_input.as_bytes(), &signature)
        .map_err(|_| TokenError::BadSignature)?;
    if token.claims.iss != expected_issuer {
        return Err(TokenError::WrongIssuer(token.claims.iss));
    }
    if token.claims.iat > now + CLOCK_SKEW_SECS {
        return Err(TokenError::IssuedInFuture);
    }
    if now >= token.claims.exp {
        return Err(TokenError::Expired);
    }
    Ok(token.claims)
}
