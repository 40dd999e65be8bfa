use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::{json, Value};

use lrms_cli::client::Client;
use lrms_cli::keyfile::{public_path, KeyFile};
use lrms_cli::{scenario, CliError};
use lrms_core::c2i::{self, OverheadReport};
use lrms_core::crypto::{self, DomainParams, DEFAULT_KEY_BITS, MIN_PARAM_BITS};
use lrms_core::ledger::{load_chain_file, verify_chain, Block, Ledger, LedgerError};
use lrms_core::pipeline::{self, DnaCiphertext, PlainRecord, DEFAULT_CHUNK_DIGITS};
use lrms_core::trading::cert::{verify_certificate, Certificate};
use lrms_service::state::CHAIN_FILE;
use lrms_service::views::{BlockView, VerifyResponse, ViolationView};
use lrms_service::{ServeError, ServiceConfig, StartupError};

#[derive(Parser)]
#[command(name = "lrms", version, about = "Land record management: keys, certificates, records, chain and service")]
struct Cli {
    /// Print structured JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an ElGamal key pair (writes FILE and its public half).
    Keygen {
        #[arg(long, default_value_t = DEFAULT_KEY_BITS)]
        bits: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        subject: Option<String>,
    },
    /// Issue, show and verify certificates.
    #[command(subcommand)]
    Cert(CertCommand),
    /// Encode, encrypt and decrypt land records.
    #[command(subcommand)]
    Record(RecordCommand),
    /// Inspect and verify the ledger.
    #[command(subcommand)]
    Chain(ChainCommand),
    /// Run the HTTP service.
    Serve(ServeArgs),
    /// Run scripted end-to-end flows.
    #[command(subcommand)]
    Scenario(ScenarioCommand),
    /// Measure codec compactness.
    #[command(subcommand)]
    Bench(BenchCommand),
}

#[derive(Args, Clone)]
struct UrlArg {
    #[arg(long, env = "LRMS_URL", default_value = "http://127.0.0.1:8080")]
    url: String,
}

#[derive(Subcommand)]
enum CertCommand {
    /// Ask the CA to certify a key file's public key.
    Issue {
        #[command(flatten)]
        url: UrlArg,
        #[arg(long)]
        key: PathBuf,
        /// Defaults to the subject recorded in the key file.
        #[arg(long)]
        subject: Option<String>,
        #[arg(long)]
        days: Option<u32>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fetch a certificate by serial.
    Show {
        #[command(flatten)]
        url: UrlArg,
        #[arg(long)]
        serial: u64,
    },
    /// Check a certificate against the CA root.
    Verify {
        #[command(flatten)]
        url: UrlArg,
        #[arg(long, conflicts_with = "file", required_unless_present = "file")]
        serial: Option<u64>,
        #[arg(long)]
        file: Option<PathBuf>,
    },
}

#[derive(Args)]
struct TextInput {
    /// Literal input; otherwise read from --in.
    #[arg(long, conflicts_with = "input", required_unless_present = "input")]
    text: Option<String>,
    #[arg(long = "in")]
    input: Option<PathBuf>,
}

#[derive(Subcommand)]
enum RecordCommand {
    /// Text to C2I digits.
    Encode(TextInput),
    /// C2I digits to text.
    Decode(TextInput),
    /// Full pipeline: text to DNA ciphertext under a public key.
    Encrypt {
        #[arg(long)]
        key: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_CHUNK_DIGITS)]
        chunk_digits: u16,
    },
    /// DNA ciphertext back to the original bytes with a private key.
    Decrypt {
        #[arg(long)]
        key: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ChainSource {
    /// Read the chain file in this directory.
    #[arg(long, conflicts_with = "url")]
    data_dir: Option<PathBuf>,
    /// Ask a running service instead.
    #[arg(long)]
    url: Option<String>,
}

#[derive(Subcommand)]
enum ChainCommand {
    /// Create a chain holding only the genesis block.
    Init {
        #[arg(long, env = "LRMS_DATA_DIR")]
        data_dir: PathBuf,
    },
    /// Recompute every hash and link; exits 4 on the first violation.
    Verify(ChainSource),
    /// Print one block by id.
    Show {
        #[arg(long)]
        block: u64,
        #[command(flatten)]
        source: ChainSource,
    },
    /// Print the newest block.
    Tip(ChainSource),
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, env = "LRMS_PORT", default_value_t = 8080)]
    port: u16,
    #[arg(long, env = "LRMS_DATA_DIR", default_value = "./lrms-data")]
    data_dir: PathBuf,
    #[arg(long, env = "LRMS_KEY_BITS", default_value_t = DEFAULT_KEY_BITS)]
    key_bits: u64,
    #[arg(long, env = "LRMS_CHUNK_DIGITS", default_value_t = DEFAULT_CHUNK_DIGITS)]
    chunk_digits: u16,
    #[arg(long, env = "LRMS_BANK_ID", default_value = "Bank")]
    bank_id: String,
    #[arg(long, env = "LRMS_REGISTRAR_TOKEN")]
    registrar_token: Option<String>,
}

#[derive(Subcommand)]
enum ScenarioCommand {
    /// Register, list, sign and settle a parcel sale from Mr. X to Mr. Y.
    FullTrade {
        #[command(flatten)]
        url: UrlArg,
    },
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Compare C2I and ASCII-decimal digit counts on random printable text.
    C2i {
        #[arg(long, default_value_t = 1000)]
        size: usize,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
}

/// What a command prints: text lines, or one JSON value under `--json`.
struct Output {
    text: String,
    json: Value,
}

fn out(text: impl Into<String>, json: Value) -> Result<Output, CliError> {
    Ok(Output { text: text.into(), json })
}

fn read_text(input: &TextInput) -> Result<String, CliError> {
    match (&input.text, &input.input) {
        (Some(t), _) => Ok(t.clone()),
        (None, Some(p)) => fs::read_to_string(p).map_err(|e| CliError::io(p, e)),
        (None, None) => Err(CliError::input("give --text or --in")),
    }
}

fn keygen(bits: u64, path: &Path, subject: Option<String>) -> Result<Output, CliError> {
    if bits < MIN_PARAM_BITS {
        return Err(CliError::input(format!("--bits must be at least {MIN_PARAM_BITS}")));
    }
    let mut rng = rand::thread_rng();
    let params = if bits == DEFAULT_KEY_BITS {
        DomainParams::rfc2409_1024()
    } else {
        crypto::generate_domain_params(bits, &mut rng)?
    };
    let pair = crypto::keygen(&params, &mut rng);
    let key = KeyFile::private(params, pair, subject);
    let pub_path = public_path(path);
    key.save(path)?;
    key.public_half().save(&pub_path)?;
    let fp = key.fingerprint();
    out(
        format!("private key: {}\npublic key:  {}\nfingerprint: {fp}", path.display(), pub_path.display()),
        json!({ "private": path, "public": pub_path, "fingerprint": fp, "bits": key.params.bits() }),
    )
}

fn cert_summary(cert: &Certificate) -> String {
    format!(
        "serial {}\nsubject {}\nissuer {}\nvalid {}..{}\nkey fingerprint {}",
        cert.serial,
        cert.subject_id,
        cert.issuer_id,
        cert.issued_at,
        cert.expires_at,
        hex::encode(cert.key_fingerprint())
    )
}

fn to_json<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

fn cert(cmd: CertCommand) -> Result<Output, CliError> {
    match cmd {
        CertCommand::Issue { url, key, subject, days, out: dest } => {
            let key = KeyFile::load(&key)?;
            let subject = subject.or_else(|| key.subject.clone()).ok_or_else(|| CliError::input("--subject is required"))?;
            let cert = Client::new(&url.url).issue_certificate(&subject, &key.params, &key.beta, days)?;
            if let Some(dest) = dest {
                fs::write(&dest, serde_json::to_vec_pretty(&cert).unwrap()).map_err(|e| CliError::io(&dest, e))?;
            }
            out(cert_summary(&cert), to_json(&cert))
        }
        CertCommand::Show { url, serial } => {
            let cert = Client::new(&url.url).certificate(serial)?;
            out(cert_summary(&cert), to_json(&cert))
        }
        CertCommand::Verify { url, serial, file } => {
            let client = Client::new(&url.url);
            let cert: Certificate = match (serial, file) {
                (Some(s), _) => client.certificate(s)?,
                (None, Some(f)) => {
                    let bytes = fs::read(&f).map_err(|e| CliError::io(&f, e))?;
                    serde_json::from_slice(&bytes).map_err(|e| CliError::input(format!("certificate file: {e}")))?
                }
                (None, None) => return Err(CliError::input("give --serial or --file")),
            };
            let ca = client.ca_public()?;
            if !verify_certificate(&ca, &cert, lrms_service::unix_now()) {
                return Err(CliError::Verification(format!("certificate {} is not valid under {}", cert.serial, ca.issuer_id)));
            }
            out(
                format!("certificate {} for {} is valid", cert.serial, cert.subject_id),
                json!({ "valid": true, "serial": cert.serial, "subject_id": cert.subject_id }),
            )
        }
    }
}

fn record(cmd: RecordCommand) -> Result<Output, CliError> {
    match cmd {
        RecordCommand::Encode(input) => {
            let text = read_text(&input)?;
            let digits = c2i::encode_text(&text)?;
            out(digits.clone(), json!({ "digits": digits, "characters": text.chars().count() }))
        }
        RecordCommand::Decode(input) => {
            let digits = read_text(&input)?;
            let text = c2i::decode_digits(digits.trim())?;
            out(text.clone(), json!({ "text": text }))
        }
        RecordCommand::Encrypt { key, input, out: dest, chunk_digits } => {
            let key = KeyFile::load(&key)?;
            let bytes = fs::read(&input).map_err(|e| CliError::io(&input, e))?;
            let text = String::from_utf8(bytes).map_err(|_| CliError::input("input is not text over the C2I alphabet"))?;
            let record = PlainRecord::new(text)?;
            let chunk = pipeline::fitting_chunk_digits(&key.params, chunk_digits);
            let ct = pipeline::encrypt_record(&key.params, &key.beta, &record, chunk, &mut rand::thread_rng())?;
            fs::write(&dest, serde_json::to_vec_pretty(&ct).unwrap()).map_err(|e| CliError::io(&dest, e))?;
            out(
                format!("{} bases written to {}", ct.dna.len(), dest.display()),
                json!({ "bases": ct.dna.len(), "chunk_digits": chunk, "out": dest, "key_fingerprint": hex::encode(ct.key_fingerprint) }),
            )
        }
        RecordCommand::Decrypt { key, input, out: dest } => {
            let key = KeyFile::load(&key)?;
            let pair = key.require_private()?;
            let bytes = fs::read(&input).map_err(|e| CliError::io(&input, e))?;
            let ct: DnaCiphertext = serde_json::from_slice(&bytes).map_err(|e| CliError::input(format!("ciphertext file: {e}")))?;
            let plain = pipeline::decrypt_record(&key.params, pair.private_a(), &ct)?;
            fs::write(&dest, plain.as_str()).map_err(|e| CliError::io(&dest, e))?;
            out(
                format!("{} characters written to {}", plain.as_str().len(), dest.display()),
                json!({ "characters": plain.as_str().len(), "out": dest }),
            )
        }
    }
}

fn local_chain(dir: &Path) -> Result<Vec<Block>, CliError> {
    match load_chain_file(&dir.join(CHAIN_FILE)) {
        Ok(blocks) => Ok(blocks),
        Err(LedgerError::Corrupt(v)) => Err(CliError::Verification(v.to_string())),
        Err(e) => Err(CliError::input(e.to_string())),
    }
}

fn show_block(view: &BlockView) -> Output {
    let mut text = format!(
        "block {}\nhash {}\nprev {}\nmerkle {}\ntimestamp {}\ntransactions {}",
        view.block_id, view.hash, view.prev_hash, view.merkle_root, view.timestamp, view.tx_count
    );
    for t in &view.transactions {
        text.push_str(&format!("\n  {} {} owner={:?} bases={}", t.tx_id, t.kind, t.owner_id, t.dna.len()));
    }
    Output { text, json: to_json(view) }
}

fn chain_block(source: &ChainSource, which: Option<u64>) -> Result<BlockView, CliError> {
    match (&source.data_dir, &source.url) {
        (Some(dir), _) => {
            let blocks = local_chain(dir)?;
            let block = match which {
                Some(id) => blocks.get(id as usize).ok_or_else(|| CliError::input(format!("no block {id}")))?,
                None => blocks.last().expect("genesis always present"),
            };
            Ok(BlockView::from(block))
        }
        (None, Some(url)) => {
            let client = Client::new(url);
            match which {
                Some(id) => client.get(&format!("/chain/blocks/{id}"), None),
                None => client.get("/chain/tip", None),
            }
        }
        (None, None) => Err(CliError::input("give --data-dir or --url")),
    }
}

fn chain(cmd: ChainCommand) -> Result<Output, CliError> {
    match cmd {
        ChainCommand::Init { data_dir } => {
            fs::create_dir_all(&data_dir).map_err(|e| CliError::io(&data_dir, e))?;
            let ledger = Ledger::open(&data_dir.join(CHAIN_FILE), lrms_service::unix_now()).map_err(|e| match e {
                LedgerError::Corrupt(v) => CliError::Verification(v.to_string()),
                other => CliError::input(other.to_string()),
            })?;
            let tip = ledger.tip();
            out(
                format!("chain at {} has {} block(s); tip {}", data_dir.display(), ledger.height(), hex::encode(tip.hash())),
                json!({ "height": ledger.height(), "tip_hash": hex::encode(tip.hash()) }),
            )
        }
        ChainCommand::Verify(source) => {
            let resp = match (&source.data_dir, &source.url) {
                (Some(dir), _) => {
                    let blocks = local_chain(dir)?;
                    let violation = verify_chain(&blocks).err();
                    VerifyResponse { ok: violation.is_none(), height: blocks.len() as u64, violation: violation.as_ref().map(ViolationView::from) }
                }
                (None, Some(url)) => Client::new(url).get("/chain/verify", None)?,
                (None, None) => return Err(CliError::input("give --data-dir or --url")),
            };
            match &resp.violation {
                None => out(format!("ok: {} blocks verified", resp.height), to_json(&resp)),
                Some(v) => Err(CliError::Verification(format!("violation at block {}: {} {}", v.position, v.reason, v.detail))),
            }
        }
        ChainCommand::Show { block, source } => Ok(show_block(&chain_block(&source, Some(block))?)),
        ChainCommand::Tip(source) => Ok(show_block(&chain_block(&source, None)?)),
    }
}

fn serve(args: ServeArgs, json_mode: bool) -> Result<Output, CliError> {
    let mut config = ServiceConfig::new(&args.data_dir);
    config.port = args.port;
    config.key_bits = args.key_bits;
    config.chunk_digits = args.chunk_digits;
    config.bank_id = args.bank_id;
    config.registrar_token = args.registrar_token;
    let data_dir = args.data_dir.clone();
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Failure(e.to_string()))?;
    let result = runtime.block_on(lrms_service::serve(config, |addr| {
        if json_mode {
            println!("{}", json!({ "listening": addr.to_string(), "port": addr.port(), "data_dir": data_dir }));
        } else {
            println!("listening on {addr} (data dir {})", data_dir.display());
        }
    }));
    match result {
        Ok(()) => out("stopped", json!({ "stopped": true })),
        Err(ServeError::Startup(StartupError::CorruptChain(v))) => Err(CliError::Verification(format!("refusing to start: {v}"))),
        Err(e) => Err(CliError::Failure(e.to_string())),
    }
}

fn bench_c2i(size: usize, samples: usize, seed: Option<u64>) -> Result<Output, CliError> {
    if size == 0 || samples == 0 {
        return Err(CliError::input("--size and --samples must be positive"));
    }
    let mut rng = StdRng::seed_from_u64(seed.unwrap_or_else(rand::random));
    let alphabet: Vec<char> = c2i::alphabet().collect();
    let texts: Vec<String> =
        (0..samples).map(|_| (0..size).map(|_| alphabet[rng.gen_range(0..alphabet.len())]).collect()).collect();
    for t in &texts {
        let one = OverheadReport::measure([t.as_str()])?;
        if one.c2i_digits != 2 * size || one.ascii_digits != 3 * size {
            return Err(CliError::Verification(format!("digit counts {one:?} are not 2n and 3n")));
        }
    }
    let report = OverheadReport::measure(texts.iter().map(String::as_str))?;
    let pct = report.reduction_percent();
    out(
        format!(
            "samples: {samples} x {size} characters\nc2i digits: {}\nascii-decimal digits: {}\nreduction: {pct:.2}%",
            report.c2i_digits, report.ascii_digits
        ),
        json!({
            "samples": samples,
            "size": size,
            "c2i_digits": report.c2i_digits,
            "ascii_digits": report.ascii_digits,
            "reduction_percent": format!("{pct:.2}"),
        }),
    )
}

fn run(cli: Cli) -> Result<Output, CliError> {
    let json_mode = cli.json;
    match cli.command {
        Command::Keygen { bits, out: path, subject } => keygen(bits, &path, subject),
        Command::Cert(c) => cert(c),
        Command::Record(c) => record(c),
        Command::Chain(c) => chain(c),
        Command::Serve(args) => serve(args, json_mode),
        Command::Scenario(ScenarioCommand::FullTrade { url }) => {
            let client = Client::new(&url.url);
            let mut log = |line: &str| {
                if !json_mode {
                    emit(line);
                }
            };
            let report = scenario::full_trade(&client, &mut log)?;
            // Steps were already printed as they happened.
            Ok(Output { text: String::new(), json: to_json(&report) })
        }
        Command::Bench(BenchCommand::C2i { size, samples, seed }) => bench_c2i(size, samples, seed),
    }
}

/// Writes to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let json_mode = cli.json;
    match run(cli) {
        Ok(o) => {
            if json_mode {
                emit(&serde_json::to_string_pretty(&o.json).unwrap());
            } else if !o.text.is_empty() {
                emit(&o.text);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            if json_mode {
                emit(&serde_json::to_string_pretty(&e.envelope()).unwrap());
            }
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
