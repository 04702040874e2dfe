//! Canonical byte encoding for everything that gets hashed or signed.
//!
//! Layout rules (documented in `docs/encoding.md`):
//!
//! * struct fields are written in declaration order with no padding;
//! * enums start with a single tag byte, followed by the variant's fields;
//! * `u8`/`u16`/`u32`/`u64`/`i64` are fixed-width little-endian;
//! * `bool` is one byte, `0` or `1`;
//! * `Option<T>` is a tag byte (`0` = none, `1` = some) followed by `T`;
//! * lists and byte strings are a `u32` little-endian element count followed
//!   by the elements;
//! * fixed-size arrays (`[u8; N]`) are written raw.
//!
//! Decoding is strict: trailing bytes, unknown tags and non-canonical booleans
//! are rejected, so `decode(encode(x)) == x` and every value has exactly one
//! encoding.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("unexpected end of input")]
    UnexpectedEnd,
    #[error("invalid tag {tag} for {ty}")]
    InvalidTag { ty: &'static str, tag: u8 },
    #[error("{remaining} trailing bytes")]
    TrailingBytes { remaining: usize },
    #[error("invalid value for {0}")]
    InvalidValue(&'static str),
}

pub trait Encode {
    fn encode_to(&self, out: &mut Vec<u8>);

    fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.encode_to(&mut out);
        out
    }
}

pub trait Decode: Sized {
    fn decode_from(reader: &mut Reader<'_>) -> Result<Self, DecodeError>;

    /// Decodes a complete value; leftover bytes are an error.
    fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut reader = Reader::new(bytes);
        let value = Self::decode_from(&mut reader)?;
        reader.finish()?;
        Ok(value)
    }
}

pub struct Reader<'a> {
    bytes: &'a [u8],
    position: usize,
}

impl<'a> Reader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, position: 0 }
    }

    pub fn take(&mut self, len: usize) -> Result<&'a [u8], DecodeError> {
        let end = self
            .position
            .checked_add(len)
            .ok_or(DecodeError::UnexpectedEnd)?;
        let slice = self
            .bytes
            .get(self.position..end)
            .ok_or(DecodeError::UnexpectedEnd)?;
        self.position = end;
        Ok(slice)
    }

    pub fn byte(&mut self) -> Result<u8, DecodeError> {
        Ok(self.take(1)?[0])
    }

    pub fn remaining(&self) -> usize {
        self.bytes.len() - self.position
    }

    pub fn finish(self) -> Result<(), DecodeError> {
        match self.remaining() {
            0 => Ok(()),
            remaining => Err(DecodeError::TrailingBytes { remaining }),
        }
    }
}

macro_rules! impl_int {
    ($($ty:ty),*) => {$(
        impl Encode for $ty {
            fn encode_to(&self, out: &mut Vec<u8>) {
                out.extend_from_slice(&self.to_le_bytes());
            }
        }

        impl Decode for $ty {
            fn decode_from(reader: &mut Reader<'_>) -> Result<Self, DecodeError> {
                let bytes = reader.take(std::mem::size_of::<$ty>())?;
                Ok(<$ty>::from_le_bytes(bytes.try_into().expect("length checked")))
            }
        }
    )*};
}

impl_int!(u8, u16, u32, u64, i64);

impl Encode for bool {
    fn encode_to(&self, out: &mut Vec<u8>) {
        out.push(u8::from(*self));
    }
}

impl Decode for bool {
    fn decode_from(reader: &mut Reader<'_>) -> Result<Self, DecodeError> {
        match reader.byte()? {
            0 => Ok(false),
            1 => Ok(true),
            tag => Err(DecodeError::InvalidTag { ty: "bool", tag }),
        }
    }
}

impl<const N: usize> Encode for [u8; N] {
    fn encode_to(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(self);
    }
}

impl<const N: usize> Decode for [u8; N] {
    fn decode_from(reader: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(reader.take(N)?.try_into().expect("length checked"))
    }
}

pub(crate) fn encode_len(len: usize, out: &mut Vec<u8>) {
    let len = u32::try_from(len).expect("collection longer than u32::MAX");
    len.encode_to(out);
}

impl<T: Encode> Encode for Vec<T> {
    fn encode_to(&self, out: &mut Vec<u8>) {
        self.as_slice().encode_to(out);
    }
}

impl<T: Encode> Encode for [T] {
    fn encode_to(&self, out: &mut Vec<u8>) {
        encode_len(self.len(), out);
        for item in self {
            item.encode_to(out);
        }
    }
}

impl<T: Decode> Decode for Vec<T> {
    fn decode_from(reader: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let len = u32::decode_from(reader)? as usize;
        // Every element takes at least one byte, which bounds the allocation.
        if len > reader.remaining() {
            return Err(DecodeError::UnexpectedEnd);
        }
        (0..len).map(|_| T::decode_from(reader)).collect()
    }
}

impl Encode for String {
    fn encode_to(&self, out: &mut Vec<u8>) {
        self.as_bytes().to_vec().encode_to(out);
    }
}

impl Decode for String {
    fn decode_from(reader: &mut Reader<'_>) -> Result<Self, DecodeError> {
        String::from_utf8(Vec::<u8>::decode_from(reader)?)
            .map_err(|_| DecodeError::InvalidValue("utf-8 string"))
    }
}

impl<T: Encode> Encode for Option<T> {
    fn encode_to(&self, out: &mut Vec<u8>) {
        match self {
            None => out.push(0),
            Some(value) => {
                out.push(1);
                value.encode_to(out);
            }
        }
    }
}

impl<T: Decode> Decode for Option<T> {
    fn decode_from(reader: &mut Reader<'_>) -> Result<Self, DecodeError> {
        match reader.byte()? {
            0 => Ok(None),
            1 => Ok(Some(T::decode_from(reader)?)),
            tag => Err(DecodeError::InvalidTag { ty: "Option", tag }),
        }
    }
}

/// Pairs of optional values, as used for the two roles of a swap.
impl<T: Encode> Encode for [Option<T>; 2] {
    fn encode_to(&self, out: &mut Vec<u8>) {
        self[0].encode_to(out);
        self[1].encode_to(out);
    }
}

impl<T: Decode> Decode for [Option<T>; 2] {
    fn decode_from(reader: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok([Option::decode_from(reader)?, Option::decode_from(reader)?])
    }
}

impl<T: Encode> Encode for Box<T> {
    fn encode_to(&self, out: &mut Vec<u8>) {
        (**self).encode_to(out);
    }
}

impl<T: Decode> Decode for Box<T> {
    fn decode_from(reader: &mut Reader<'_>) -> Result<Self, DecodeError> {
        T::decode_from(reader).map(Box::new)
    }
}

impl<A: Encode, B: Encode> Encode for (A, B) {
    fn encode_to(&self, out: &mut Vec<u8>) {
        self.0.encode_to(out);
        self.1.encode_to(out);
    }
}

impl<A: Decode, B: Decode> Decode for (A, B) {
    fn decode_from(reader: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok((A::decode_from(reader)?, B::decode_from(reader)?))
    }
}

/// Implements [`Encode`] and [`Decode`] for a struct by listing its fields in
/// declaration order.
#[macro_export]
macro_rules! codec_struct {
    ($name:ident { $($field:ident),* $(,)? }) => {
        impl $crate::encoding::Encode for $name {
            fn encode_to(&self, out: &mut Vec<u8>) {
                $( $crate::encoding::Encode::encode_to(&self.$field, out); )*
                let _ = out;
            }
        }

        impl $crate::encoding::Decode for $name {
            fn decode_from(
                reader: &mut $crate::encoding::Reader<'_>,
            ) -> Result<Self, $crate::encoding::DecodeError> {
                let _ = &reader;
                Ok(Self { $( $field: $crate::encoding::Decode::decode_from(reader)?, )* })
            }
        }
    };
}

/// Implements [`Encode`] and [`Decode`] for an enum whose variants are unit or
/// struct-like. Each variant is given its explicit tag byte.
#[macro_export]
macro_rules! codec_enum {
    ($name:ident {
        $($tag:literal => $variant:ident $({ $($field:ident),* $(,)? })?),* $(,)?
    }) => {
        impl $crate::encoding::Encode for $name {
            fn encode_to(&self, out: &mut Vec<u8>) {
                match self {
                    $(
                        $name::$variant { $($($field),*)? } => {
                            out.push($tag);
                            $($( $crate::encoding::Encode::encode_to($field, out); )*)?
                        }
                    )*
                }
            }
        }

        impl $crate::encoding::Decode for $name {
            fn decode_from(
                reader: &mut $crate::encoding::Reader<'_>,
            ) -> Result<Self, $crate::encoding::DecodeError> {
                match reader.byte()? {
                    $(
                        $tag => Ok($name::$variant {
                            $($( $field: $crate::encoding::Decode::decode_from(reader)?, )*)?
                        }),
                    )*
                    tag => Err($crate::encoding::DecodeError::InvalidTag {
                        ty: stringify!($name),
                        tag,
                    }),
                }
            }
        }
    };
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integers_are_little_endian() {
        assert_eq!(0x0102_0304u32.to_bytes(), vec![4, 3, 2, 1]);
        assert_eq!(1u64.to_bytes(), vec![1, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!((-1i64).to_bytes(), vec![0xff; 8]);
    }

    #[test]
    fn list_starts_with_count() {
        let bytes = vec![7u16, 9u16].to_bytes();
        assert_eq!(bytes, vec![2, 0, 0, 0, 7, 0, 9, 0]);
    }

    #[test]
    fn strict_decoding() {
        assert_eq!(
            bool::from_bytes(&[2]),
            Err(DecodeError::InvalidTag { ty: "bool", tag: 2 })
        );
        assert_eq!(
            u32::from_bytes(&[1, 0, 0, 0, 0]),
            Err(DecodeError::TrailingBytes { remaining: 1 })
        );
        assert_eq!(u32::from_bytes(&[1, 0]), Err(DecodeError::UnexpectedEnd));
        // A huge declared length must not allocate.
        assert_eq!(
            Vec::<u8>::from_bytes(&[0xff, 0xff, 0xff, 0xff]),
            Err(DecodeError::UnexpectedEnd)
        );
    }

    #[test]
    fn option_and_tuple_round_trip() {
        let value: (Option<u64>, Vec<u8>) = (Some(5), vec![1, 2, 3]);
        let bytes = value.to_bytes();
        assert_eq!(bytes[0], 1);
        assert_eq!(<(Option<u64>, Vec<u8>)>::from_bytes(&bytes).unwrap(), value);
    }
}
