//! Nonce binding between the user-facing origin and the service provider's
//! challenge.

use sha2::{Digest, Sha512};

use crate::counter;
use crate::encoding::b64url;

/// `base64url(SHA-512(origin ‖ nonce))`.
///
/// `origin` must already be in canonical form (lowercase scheme and host,
/// default port elided, no trailing slash), otherwise the agent and the
/// service provider disagree on the digest.
pub fn nonce_binding(origin: &str, nonce: &str) -> String {
    counter::record_hash_eval();
    let mut h = Sha512::new();
    h.update(origin.as_bytes());
    h.update(nonce.as_bytes());
    b64url(&h.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binding_depends_on_origin() {
        let nonce = "n-0S6_WzA2Mj";
        let genuine = nonce_binding("https://sp.example", nonce);
        assert_eq!(genuine, nonce_binding("https://sp.example", nonce));
        assert_ne!(genuine, nonce_binding("https://evil.example", nonce));
        assert_eq!(genuine.len(), 86);
    }

    #[test]
    fn binding_is_plain_concatenation() {
        // Only the concatenation is hashed; splitting it differently does not
        // change the digest.
        assert_eq!(
            nonce_binding("https://sp.example", "abc"),
            nonce_binding("https://sp.exampleab", "c")
        );
    }
}
