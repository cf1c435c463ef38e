//! Unpadded base64url transport of group values.

use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine;

use crate::group::{GroupError, PrimeGroup};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DecodeError {
    #[error("invalid base64url: {0}")]
    Base64(String),
    #[error(transparent)]
    Group(#[from] GroupError),
}

pub fn b64url(bytes: &[u8]) -> String {
    URL_SAFE_NO_PAD.encode(bytes)
}

pub fn b64url_decode(text: &str) -> Result<Vec<u8>, DecodeError> {
    URL_SAFE_NO_PAD
        .decode(text)
        .map_err(|e| DecodeError::Base64(e.to_string()))
}

pub fn element_to_b64<G: PrimeGroup>(x: &G::Element) -> String {
    b64url(&G::encode_element(x))
}

pub fn element_from_b64<G: PrimeGroup>(text: &str) -> Result<G::Element, DecodeError> {
    Ok(G::decode_element(&b64url_decode(text)?)?)
}

pub fn scalar_to_b64<G: PrimeGroup>(s: &G::Scalar) -> String {
    b64url(&G::encode_scalar(s))
}

pub fn scalar_from_b64<G: PrimeGroup>(text: &str) -> Result<G::Scalar, DecodeError> {
    Ok(G::decode_scalar(&b64url_decode(text)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{TestElement, TestGroup};

    #[test]
    fn padded_input_is_rejected() {
        assert!(b64url_decode("ABI=").is_err());
        assert_eq!(b64url_decode("ABI").unwrap(), vec![0, 18]);
    }

    #[test]
    fn element_transport() {
        let x = TestElement::new(18).unwrap();
        assert_eq!(element_to_b64::<TestGroup>(&x), "ABI");
        assert_eq!(element_from_b64::<TestGroup>("ABI"), Ok(x));
        assert_eq!(
            element_from_b64::<TestGroup>("AAE"),
            Err(DecodeError::Group(GroupError::Identity))
        );
    }
}
