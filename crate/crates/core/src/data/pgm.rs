//! Binary portable graymap (P5, maxval 255).

use crate::error::PgmError;

/// 8-bit grayscale image, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    /// `None` if a dimension is zero or the pixel count does not match.
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Option<Self> {
        (width > 0 && height > 0 && pixels.len() == width * height).then_some(GrayImage {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32, PgmError> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(PgmError::BadHeader(format!("missing {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| PgmError::BadHeader(format!("{what} out of range")))
    }
}

/// Decodes one image from the front of `bytes` and returns it with the
/// number of bytes consumed. Used for concatenated PGM streams.
pub fn decode_pgm_prefix(bytes: &[u8]) -> Result<(GrayImage, usize), PgmError> {
    match bytes {
        [b'P', b'5', ..] => {}
        [b'P', d, ..] if d.is_ascii_digit() => {
            return Err(PgmError::UnsupportedFormat(format!("P{}", *d as char)))
        }
        _ => return Err(PgmError::BadMagic),
    }
    let mut cur = Cursor { bytes, pos: 2 };
    if !cur.bytes.get(2).is_some_and(|b| b.is_ascii_whitespace() || *b == b'#') {
        return Err(PgmError::BadMagic);
    }
    let width = cur.number("width")? as usize;
    let height = cur.number("height")? as usize;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(PgmError::BadHeader(format!("zero dimension {width}x{height}")));
    }
    if maxval != 255 {
        return Err(PgmError::UnsupportedMaxval(maxval));
    }
    match cur.bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        Some(_) => return Err(PgmError::BadHeader("no whitespace after maxval".into())),
        None => {
            return Err(PgmError::Truncated {
                expected: width * height,
                actual: 0,
            })
        }
    }
    let expected = width * height;
    let available = bytes.len() - cur.pos;
    if available < expected {
        return Err(PgmError::Truncated {
            expected,
            actual: available,
        });
    }
    let pixels = bytes[cur.pos..cur.pos + expected].to_vec();
    let image = GrayImage::new(width, height, pixels).expect("dimensions validated");
    Ok((image, cur.pos + expected))
}

/// Decodes a single P5 image. Bytes after the pixel payload are ignored.
pub fn decode_gray_image(bytes: &[u8]) -> Result<GrayImage, PgmError> {
    decode_pgm_prefix(bytes).map(|(img, _)| img)
}

pub fn encode_pgm(image: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", image.width, image.height).into_bytes();
    out.extend_from_slice(&image.pixels);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_fixture() {
        let bytes = b"P5\n2 2\n255\n\x00\x55\xaa\xff";
        let img = decode_gray_image(bytes).unwrap();
        assert_eq!((img.width(), img.height()), (2, 2));
        assert_eq!(img.pixels(), &[0, 85, 170, 255]);
    }

    #[test]
    fn comments_in_header() {
        let bytes = b"P5 # made by hand\n# another\n3 1 255\n\x01\x02\x03";
        assert_eq!(decode_gray_image(bytes).unwrap().pixels(), &[1, 2, 3]);
    }

    #[test]
    fn color_stream_is_unsupported() {
        let bytes = b"P6\n1 1\n255\n\x00\x00\x00";
        assert_eq!(
            decode_gray_image(bytes),
            Err(PgmError::UnsupportedFormat("P6".into()))
        );
    }

    #[test]
    fn garbage_is_bad_magic() {
        assert_eq!(decode_gray_image(b"\x89PNG\r\n"), Err(PgmError::BadMagic));
        assert_eq!(decode_gray_image(b""), Err(PgmError::BadMagic));
    }

    #[test]
    fn short_payload_is_truncated() {
        let mut bytes = b"P5\n4 4\n255\n".to_vec();
        bytes.extend(std::iter::repeat(7).take(15));
        assert_eq!(
            decode_gray_image(&bytes),
            Err(PgmError::Truncated {
                expected: 16,
                actual: 15
            })
        );
    }

    #[test]
    fn sixteen_bit_maxval_rejected() {
        assert_eq!(
            decode_gray_image(b"P5 1 1 65535\n\x00\x00"),
            Err(PgmError::UnsupportedMaxval(65535))
        );
    }

    #[test]
    fn encode_decode_round_trip_and_prefix_length() {
        let img = GrayImage::new(3, 2, vec![9, 8, 7, 6, 5, 4]).unwrap();
        let mut bytes = encode_pgm(&img);
        let len = bytes.len();
        bytes.extend_from_slice(&encode_pgm(&img));
        let (first, used) = decode_pgm_prefix(&bytes).unwrap();
        assert_eq!(first, img);
        assert_eq!(used, len);
    }
}
