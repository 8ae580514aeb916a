//! Binary model checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic    "PMCK"
//! version  u32 (currently 1)
//! config   8 x u64: embed_dim, layers, model_dim, heads,
//!                   key_dim, ffn_dim, max_len, vocab_size
//! vocab    u64 count, then count x (u32 length + UTF-8 encoded token),
//!          in id order starting at id 2 (PAD and UNK are implicit)
//! tensors  u64 count, then per tensor:
//!            u32 length + UTF-8 name
//!            u32 ndim, ndim x u64 dims
//!            prod(dims) x f32 data
//! ```
//!
//! Loading validates the magic, version, vocabulary size and every tensor
//! name/shape against the layout derived from the config. The checkpoint
//! carries its vocabulary so evaluation never has to rebuild one.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use proofmatch_core::corpus::Vocabulary;
use proofmatch_core::encoder::{EncoderConfig, EncoderModel};
use proofmatch_core::token::TypedToken;

use crate::Error;

const MAGIC: &[u8; 4] = b"PMCK";
const VERSION: u32 = 1;

fn bad(path: &Path, detail: impl Into<String>) -> Error {
    Error::Data(format!("{}: {}", path.display(), detail.into()))
}

struct Reader<'a> {
    inner: BufReader<File>,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn exact(&mut self, buf: &mut [u8]) -> Result<(), Error> {
        self.inner
            .read_exact(buf)
            .map_err(|_| bad(self.path, "unexpected end of checkpoint"))
    }

    fn u32(&mut self) -> Result<u32, Error> {
        let mut b = [0u8; 4];
        self.exact(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }

    fn u64(&mut self) -> Result<u64, Error> {
        let mut b = [0u8; 8];
        self.exact(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }

    fn string(&mut self) -> Result<String, Error> {
        let len = self.u32()? as usize;
        let mut b = vec![0u8; len];
        self.exact(&mut b)?;
        String::from_utf8(b).map_err(|_| bad(self.path, "non-UTF-8 string in checkpoint"))
    }
}

pub fn save_checkpoint(model: &EncoderModel, vocab: &Vocabulary, path: &Path) -> Result<(), Error> {
    let file = File::create(path).map_err(Error::io(path))?;
    let mut w = BufWriter::new(file);
    let put = |w: &mut BufWriter<File>, bytes: &[u8]| -> Result<(), Error> {
        w.write_all(bytes).map_err(Error::io(path))
    };

    put(&mut w, MAGIC)?;
    put(&mut w, &VERSION.to_le_bytes())?;
    let c = model.config();
    for v in [
        c.embed_dim,
        c.layers,
        c.model_dim,
        c.heads,
        c.key_dim,
        c.ffn_dim,
        c.max_len,
        model.vocab_size(),
    ] {
        put(&mut w, &(v as u64).to_le_bytes())?;
    }

    put(&mut w, &(vocab.tokens().len() as u64).to_le_bytes())?;
    for token in vocab.tokens() {
        let encoded = token.encode();
        put(&mut w, &(encoded.len() as u32).to_le_bytes())?;
        put(&mut w, encoded.as_bytes())?;
    }

    put(&mut w, &(model.layout().len() as u64).to_le_bytes())?;
    for spec in model.layout() {
        put(&mut w, &(spec.name.len() as u32).to_le_bytes())?;
        put(&mut w, spec.name.as_bytes())?;
        put(&mut w, &(spec.shape.len() as u32).to_le_bytes())?;
        for &dim in &spec.shape {
            put(&mut w, &(dim as u64).to_le_bytes())?;
        }
        let data = &model.params()[spec.offset..spec.offset + spec.len()];
        for &v in data {
            put(&mut w, &(v as f32).to_le_bytes())?;
        }
    }
    w.flush().map_err(Error::io(path))
}

pub fn load_checkpoint(path: &Path) -> Result<(EncoderModel, Vocabulary), Error> {
    let file = File::open(path).map_err(Error::io(path))?;
    let mut r = Reader {
        inner: BufReader::new(file),
        path,
    };

    let mut magic = [0u8; 4];
    r.exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(bad(path, "not a model checkpoint (bad magic)"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(bad(path, format!("unsupported checkpoint version {version}")));
    }

    let mut dims = [0u64; 8];
    for d in dims.iter_mut() {
        *d = r.u64()?;
    }
    let config = EncoderConfig {
        embed_dim: dims[0] as usize,
        layers: dims[1] as usize,
        model_dim: dims[2] as usize,
        heads: dims[3] as usize,
        key_dim: dims[4] as usize,
        ffn_dim: dims[5] as usize,
        max_len: dims[6] as usize,
    };
    let vocab_size = dims[7] as usize;

    let token_count = r.u64()? as usize;
    if token_count + 2 != vocab_size {
        return Err(bad(
            path,
            format!("vocabulary holds {token_count} tokens but config says {vocab_size} ids"),
        ));
    }
    let mut tokens = Vec::with_capacity(token_count);
    for _ in 0..token_count {
        let encoded = r.string()?;
        let token = TypedToken::decode(&encoded)
            .map_err(|e| bad(path, format!("bad vocabulary entry: {e}")))?;
        tokens.push(token);
    }
    let vocab = Vocabulary::from_id_order(tokens);

    // Seed is irrelevant: every parameter is overwritten below.
    let mut model = EncoderModel::new(config, vocab_size, 0)
        .map_err(|e| bad(path, format!("invalid checkpoint config: {e}")))?;

    let tensor_count = r.u64()? as usize;
    if tensor_count != model.layout().len() {
        return Err(bad(
            path,
            format!(
                "checkpoint has {tensor_count} tensors, config wants {}",
                model.layout().len()
            ),
        ));
    }
    let layout = model.layout().to_vec();
    let mut params = vec![0.0f64; model.num_params()];
    for spec in &layout {
        let name = r.string()?;
        if name != spec.name {
            return Err(bad(path, format!("expected tensor {:?}, found {name:?}", spec.name)));
        }
        let ndim = r.u32()? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(r.u64()? as usize);
        }
        if shape != spec.shape {
            return Err(bad(
                path,
                format!("tensor {name:?} has shape {shape:?}, expected {:?}", spec.shape),
            ));
        }
        for slot in params[spec.offset..spec.offset + spec.len()].iter_mut() {
            let mut b = [0u8; 4];
            r.exact(&mut b)?;
            *slot = f32::from_le_bytes(b) as f64;
        }
    }
    model.set_params(params);
    Ok((model, vocab))
}
