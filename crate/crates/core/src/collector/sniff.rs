//! Magic-byte and trailer checks for downloaded image payloads.
//!
//! This is not a decoder. It catches empty bodies, HTML error pages, and
//! truncated transfers, which covers what search-engine crawls actually return.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageKind {
    Png,
    Jpeg,
    Gif,
    Webp,
    Bmp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum Malformed {
    #[error("empty payload")]
    Empty,
    #[error("unrecognized format")]
    UnknownFormat,
    #[error("{0:?} payload is truncated")]
    Truncated(ImageKind),
}

const PNG_SIG: &[u8] = b"\x89PNG\r\n\x1a\n";
const PNG_IEND: &[u8] = b"\x00\x00\x00\x00IEND\xaeB`\x82";

pub fn sniff(bytes: &[u8]) -> Result<ImageKind, Malformed> {
    if bytes.is_empty() {
        return Err(Malformed::Empty);
    }
    if bytes.starts_with(PNG_SIG) {
        return if bytes.len() >= PNG_SIG.len() + PNG_IEND.len() && bytes.ends_with(PNG_IEND) {
            Ok(ImageKind::Png)
        } else {
            Err(Malformed::Truncated(ImageKind::Png))
        };
    }
    if bytes.starts_with(&[0xFF, 0xD8, 0xFF]) {
        return if bytes.len() >= 5 && bytes.ends_with(&[0xFF, 0xD9]) {
            Ok(ImageKind::Jpeg)
        } else {
            Err(Malformed::Truncated(ImageKind::Jpeg))
        };
    }
    if bytes.starts_with(b"GIF87a") || bytes.starts_with(b"GIF89a") {
        return if bytes.len() > 6 && bytes.ends_with(&[0x3B]) {
            Ok(ImageKind::Gif)
        } else {
            Err(Malformed::Truncated(ImageKind::Gif))
        };
    }
    if bytes.len() >= 12 && bytes.starts_with(b"RIFF") && &bytes[8..12] == b"WEBP" {
        let declared = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        return if declared + 8 == bytes.len() { Ok(ImageKind::Webp) } else { Err(Malformed::Truncated(ImageKind::Webp)) };
    }
    if bytes.len() >= 6 && bytes.starts_with(b"BM") {
        let declared = u32::from_le_bytes(bytes[2..6].try_into().unwrap()) as usize;
        return if declared == bytes.len() { Ok(ImageKind::Bmp) } else { Err(Malformed::Truncated(ImageKind::Bmp)) };
    }
    Err(Malformed::UnknownFormat)
}

/// Builds a structurally plausible PNG whose body bytes depend on `salt`.
/// Used by the mock backend and fixtures.
pub fn synthetic_png(salt: &[u8]) -> Vec<u8> {
    let mut out = PNG_SIG.to_vec();
    // IHDR: 1x1 RGB
    out.extend_from_slice(&13u32.to_be_bytes());
    out.extend_from_slice(b"IHDR");
    out.extend_from_slice(&[0, 0, 0, 1, 0, 0, 0, 1, 8, 2, 0, 0, 0]);
    out.extend_from_slice(&[0, 0, 0, 0]);
    out.extend_from_slice(&(salt.len() as u32).to_be_bytes());
    out.extend_from_slice(b"IDAT");
    out.extend_from_slice(salt);
    out.extend_from_slice(&[0, 0, 0, 0]);
    out.extend_from_slice(PNG_IEND);
    out
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn tiny_png(n: u8) -> Vec<u8> {
        synthetic_png(&[n; 8])
    }

    #[test]
    fn recognizes_formats() {
        assert_eq!(sniff(&tiny_png(0)), Ok(ImageKind::Png));
        assert_eq!(sniff(&[0xFF, 0xD8, 0xFF, 0xE0, 0, 0xFF, 0xD9]), Ok(ImageKind::Jpeg));
        assert_eq!(sniff(b"GIF89a\x01\x00;"), Ok(ImageKind::Gif));
        let mut webp = b"RIFF\x04\x00\x00\x00WEBP".to_vec();
        assert_eq!(sniff(&webp), Ok(ImageKind::Webp));
        webp.push(0);
        assert_eq!(sniff(&webp), Err(Malformed::Truncated(ImageKind::Webp)));
        assert_eq!(sniff(b"BM\x06\x00\x00\x00"), Ok(ImageKind::Bmp));
    }

    #[test]
    fn rejects_bad_payloads() {
        assert_eq!(sniff(&[]), Err(Malformed::Empty));
        assert_eq!(sniff(b"<html>404</html>"), Err(Malformed::UnknownFormat));
        let png = tiny_png(3);
        assert_eq!(sniff(&png[..png.len() - 4]), Err(Malformed::Truncated(ImageKind::Png)));
        assert_eq!(sniff(&[0xFF, 0xD8, 0xFF, 0xE0]), Err(Malformed::Truncated(ImageKind::Jpeg)));
    }
}
