"""Command-line interface: ``mtpad <command> ...``."""

from __future__ import annotations

import argparse
import os
import random
import sys
from pathlib import Path
from typing import Optional

from . import cipher, cryptanalysis, framing, library
from .bitstring import BitString
from .cipher import Ambiguous, CipherError, Direction, Policy, SessionConfig, Variant
from .entropy import EntropyExhausted
from .keys import GBounds, KeyMaterialError, Rule
from .library import Generator, LibraryConfig, LibraryError, Method

LIBRARY_ENV = "MTP_LIBRARY"

EXIT_OK = 0
EXIT_ATTACK_FAILED = 1
EXIT_USAGE = 2
EXIT_FORMAT = 3
EXIT_KEY = 4
EXIT_IO = 5
EXIT_INFEASIBLE = 6
EXIT_TEST_LIBRARY = 7
EXIT_AMBIGUOUS = 8

EPILOG = f"""\
exit codes:
  {EXIT_OK}  success
  {EXIT_ATTACK_FAILED}  attack did not recover the plaintext
  {EXIT_USAGE}  usage error
  {EXIT_FORMAT}  malformed, corrupt or mismatched library/frame
  {EXIT_KEY}  invalid key material, parameters or message size
  {EXIT_IO}  file could not be read or written
  {EXIT_INFEASIBLE}  brute force refused (search space over the bound)
  {EXIT_TEST_LIBRARY}  seeded test library used without --seed/--allow-test-library
  {EXIT_AMBIGUOUS}  variant A plaintext ambiguous; both candidates written

The library path defaults to ${LIBRARY_ENV}.
"""

VARIANTS = {
    "main": Variant.MAIN, "a": Variant.VAR_A, "b": Variant.VAR_B, "c": Variant.VAR_C,
    "d": Variant.VAR_D, "e": Variant.VAR_E, "basic-f": Variant.BASIC_F, "f": Variant.BASIC_F,
}
RULES = {"a": Rule.A, "b": Rule.B}
POLICIES = {"truncate": Policy.TRUNCATE, "zero-pad": Policy.ZERO_PAD}


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


# -- helpers -----------------------------------------------------------------

def _read_input(path: str) -> bytes:
    if path == "-":
        return sys.stdin.buffer.read()
    return Path(path).read_bytes()


def _write_output(path: str, data: bytes) -> None:
    if path == "-":
        sys.stdout.buffer.write(data)
        sys.stdout.buffer.flush()
    else:
        Path(path).write_bytes(data)


def _open_in(path: str):
    return sys.stdin.buffer if path == "-" else open(path, "rb")


def _open_out(path: str):
    return sys.stdout.buffer if path == "-" else open(path, "wb")


def _load_library(args) -> library.Library:
    path = args.lib or os.environ.get(LIBRARY_ENV)
    if not path:
        raise CliError(f"no library given (use --lib or ${LIBRARY_ENV})", EXIT_USAGE)
    return library.load(path)


def _guard_test_library(lib: library.Library, args) -> None:
    if lib.generator is Generator.SEEDED_TEST and args.seed is None and not args.allow_test_library:
        raise CliError("library was generated from a seeded test source; pass --seed for a "
                       "test run or --allow-test-library", EXIT_TEST_LIBRARY)


def _entropy(args):
    return random.Random(args.seed) if args.seed is not None else random.SystemRandom()


class _PadFile:
    """Pre-shared pad on disk; the consumed offset lives in ``<pad>.offset``."""

    def __init__(self, path: str):
        self.path = Path(path)
        self.offset_path = Path(str(path) + ".offset")
        offset = int(self.offset_path.read_text()) if self.offset_path.exists() else 0
        self.transport = framing.PresharedPadTransport(self.path.read_bytes(), offset)

    def save(self) -> None:
        self.offset_path.write_text(str(self.transport.offset))


def _transport(args):
    if args.transport == "pad":
        if not args.pad:
            raise CliError("--transport pad needs --pad FILE", EXIT_USAGE)
        pad = _PadFile(args.pad)
        return pad.transport, pad.save
    return framing.NullTransport(), lambda: None


def _session(args, lib: library.Library, message_bits: Optional[int]) -> SessionConfig:
    variant = VARIANTS[args.variant]
    rule = RULES[args.rule]
    policy = POLICIES[args.policy]
    s = args.s
    if s is None:
        s = lib.s if lib.method is Method.INDEPENDENT_KEYS else max(1, min(message_bits or 1, lib.config.l))
    bounds = None
    if args.g_min is not None or args.g_max is not None:
        default = GBounds.full(lib)
        bounds = GBounds(args.g_min or default.g_min, args.g_max or default.g_max)
    return SessionConfig(variant, rule, lib, bounds=bounds, s=s, policy=policy)


def _header_for(cfg: SessionConfig, keys, transport, combined: bool) -> framing.Frame:
    a, flags, g_p, g_r = framing.seal_keywords(cfg, keys, transport, combined)
    if not cipher.has_random_key(cfg.variant):
        flags |= framing.FLAG_UNINTERLEAVED
    if cfg.policy is Policy.TRUNCATE:
        flags |= framing.FLAG_TRUNCATED
    return framing.Frame(int(cfg.variant), int(cfg.rule), flags, cfg.library.fingerprint,
                         cfg.s, g_p, g_r, a, BitString(0, 0))


# -- commands ----------------------------------------------------------------

def cmd_keygen_library(args) -> int:
    method = Method(args.method)
    if method is Method.INDEPENDENT_KEYS:
        if args.k is None or args.s is None:
            raise CliError("method 1 needs -k and -s", EXIT_USAGE)
        cfg = LibraryConfig(method, s=args.s, k=args.k)
    else:
        if args.l is None:
            raise CliError("method 2 needs -l", EXIT_USAGE)
        cfg = LibraryConfig(method, s=args.s or args.l, l=args.l)
    gen = Generator.SEEDED_TEST if args.seed is not None else Generator.EXTERNAL
    lib = library.generate(cfg, _entropy(args), gen)
    library.save(lib, args.out)
    if args.verbose:
        print(f"wrote {cfg.file_size()} bytes to {args.out} "
              f"(fingerprint {lib.fingerprint.hex()})", file=sys.stderr)
    return EXIT_OK


def cmd_encrypt(args) -> int:
    lib = _load_library(args)
    _guard_test_library(lib, args)
    data = _read_input(args.input)
    p = BitString.from_bytes(data)
    cfg = _session(args, lib, p.length)
    if p.length > cfg.s:
        raise CliError(f"message of {p.length} bits exceeds s={cfg.s}", EXIT_KEY)
    transport, save = _transport(args)
    keys = cipher.new_session_keys(cfg, _entropy(args))
    out = cipher.encrypt(cfg, keys, p)
    frame = framing.seal_message(cfg, keys, out, transport, combined=args.combined)
    _write_output(args.output, frame)
    save()
    return EXIT_OK


def _validity(args):
    if args.message_bits is None:
        return None
    return cipher.zero_padded(args.message_bits)


def cmd_decrypt(args) -> int:
    lib = _load_library(args)
    transport, save = _transport(args)
    result = framing.open_message(_read_input(args.input), lib, transport, _validity(args))
    save()
    if isinstance(result, Ambiguous):
        _write_output(args.output, result.first.to_bytes())
        if args.output != "-":
            Path(args.output + ".alt").write_bytes(result.second.to_bytes())
        print("variant A: R1 known only up to complement; both candidates written",
              file=sys.stderr)
        return EXIT_AMBIGUOUS
    _write_output(args.output, result.to_bytes())
    return EXIT_OK


def cmd_stream_encrypt(args) -> int:
    lib = _load_library(args)
    _guard_test_library(lib, args)
    if args.length is not None:
        nbytes = args.length
    elif args.input != "-":
        nbytes = Path(args.input).stat().st_size
    else:
        raise CliError("reading from stdin needs --length BYTES", EXIT_USAGE)
    args.policy = "truncate"
    cfg = _session(args, lib, 8 * nbytes)
    n = 8 * nbytes
    if n > cfg.s:
        raise CliError(f"message of {n} bits exceeds s={cfg.s}", EXIT_KEY)
    transport, save = _transport(args)
    keys = cipher.new_session_keys(cfg, _entropy(args))
    header = _header_for(cfg, keys, transport, args.combined)
    width = 2 if cipher.has_random_key(cfg.variant) else 1
    session = cipher.open_stream(cfg, keys, Direction.ENCRYPT, n)
    src, dst = _open_in(args.input), _open_out(args.output)
    try:
        writer = framing.FrameWriter(dst, header, width * n)
        seen = 0
        while True:
            chunk = src.read(args.chunk_size)
            if not chunk:
                break
            seen += len(chunk)
            if seen > nbytes:
                raise CliError(f"input longer than declared {nbytes} bytes", EXIT_KEY)
            writer.write_bits(session.push(BitString.from_bytes(chunk)))
        if seen != nbytes:
            raise CliError(f"input has {seen} bytes, declared {nbytes}", EXIT_KEY)
        writer.close()
    finally:
        if src is not sys.stdin.buffer:
            src.close()
        if dst is not sys.stdout.buffer:
            dst.close()
    save()
    return EXIT_OK


def cmd_stream_decrypt(args) -> int:
    lib = _load_library(args)
    transport, save = _transport(args)
    src, dst = _open_in(args.input), _open_out(args.output)
    try:
        reader = framing.FrameReader(src, lib.fingerprint)
        cfg, keys = framing.receiver_session(reader.header, lib, transport)
        save()
        width = 2 if cipher.has_random_key(cfg.variant) else 1
        n = reader.payload_bits // width
        session = cipher.open_stream(cfg, keys, Direction.DECRYPT, n)
        bits = framing.BitWriter()
        for chunk in reader.payload_chunks(args.chunk_size):
            dst.write(bits.feed(session.push(chunk)))
            dst.flush()
        dst.write(bits.feed(session.finish()))
        dst.write(bits.flush())
    finally:
        if src is not sys.stdin.buffer:
            src.close()
        if dst is not sys.stdout.buffer:
            dst.close()
    return EXIT_OK


def read_known(path: str) -> dict[int, int]:
    """``position bit`` per line, positions 1-indexed; ``#`` starts a comment."""
    known = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            pos, bit = (int(x) for x in line.split())
        except ValueError:
            raise CliError(f"{path}:{lineno}: expected 'position bit'", EXIT_USAGE) from None
        if pos < 1 or bit not in (0, 1):
            raise CliError(f"{path}:{lineno}: bad entry {line!r}", EXIT_USAGE)
        known[pos - 1] = bit
    return known


def _attack_input(args, lib) -> cryptanalysis.AttackInput:
    frame = framing.parse_frame(_read_input(args.frame), lib.fingerprint)
    variant = VARIANTS[args.variant] if args.variant else Variant(frame.variant)
    rule = RULES[args.rule] if args.rule else Rule(frame.rule)
    if frame.flags & framing.FLAG_UNINTERLEAVED:
        c_p, c_r = frame.payload, None
    else:
        c_p, c_r = framing.demux(frame.payload)
    return cryptanalysis.AttackInput(lib, c_p, read_known(args.known), variant, rule, c_r)


def cmd_attack(args) -> int:
    if args.attack_kind == "simulate":
        return _attack_simulate(args)
    lib = _load_library(args)
    inp = _attack_input(args, lib)
    if args.attack_kind == "brute-force":
        found = cryptanalysis.brute_force_attack(inp, args.max_keywords)
        for mask in sorted(found):
            serials = [j + 1 for j in range(lib.num_basic_keys) if mask >> j & 1]
            print(" ".join(map(str, serials)) or "-")
        print(f"{len(found)} consistent keyword(s)", file=sys.stderr)
        return EXIT_OK if found else EXIT_ATTACK_FAILED
    if inp.variant is Variant.BASIC_F or args.assume_basic:
        result = cryptanalysis.known_plaintext_attack_basic(inp)
    elif inp.variant is Variant.VAR_D:
        result = cryptanalysis.attack_variation_d_rule_a(inp)
    elif inp.variant in (Variant.VAR_B, Variant.VAR_C, Variant.VAR_E):
        result = cryptanalysis.attack_random_key_variation(inp)
    else:
        result = cryptanalysis.known_plaintext_attack_basic(inp)
    print(f"outcome={result.outcome.value} rank={result.rank}/{result.k} "
          f"candidates={result.candidates} {result.reason}".rstrip(), file=sys.stderr)
    if result.success and args.output:
        _write_output(args.output, result.plaintext.to_bytes())
    return EXIT_OK if result.success else EXIT_ATTACK_FAILED


def _attack_simulate(args) -> int:
    rng = random.Random(args.seed)
    variant = VARIANTS[args.variant or "basic-f"]
    rule = RULES[args.rule or "a"]
    wins = 0
    for trial in range(args.trials):
        sc = cryptanalysis.make_scenario(rng, variant, rule, k=args.k, s=args.s,
                                         known_bits=args.known_bits, run=args.run)
        inp = sc.attack_input()
        if args.assume_basic or variant in (Variant.BASIC_F, Variant.MAIN, Variant.VAR_A):
            res = cryptanalysis.known_plaintext_attack_basic(inp)
        elif variant is Variant.VAR_D:
            res = cryptanalysis.attack_variation_d_rule_a(inp)
        else:
            res = cryptanalysis.attack_random_key_variation(inp)
        ok = res.success and res.plaintext == sc.plaintext
        wins += ok
        report = cryptanalysis.TrialReport(trial, res.rank, ok,
                                           res.match_fraction(sc.plaintext, sc.known))
        print(report.to_line())
    print(f"{wins}/{args.trials} trials recovered the plaintext", file=sys.stderr)
    return EXIT_OK


def cmd_keyspace(args) -> int:
    method = Method(args.method)
    bounds = None
    if args.g is not None:
        bounds = GBounds(args.g, args.g)
    elif args.g_min is not None or args.g_max is not None:
        if args.g_min is None or args.g_max is None:
            raise CliError("give both --g-min and --g-max", EXIT_USAGE)
        bounds = GBounds(args.g_min, args.g_max)
    size_param = args.k if method is Method.INDEPENDENT_KEYS else args.l
    if size_param is None:
        raise CliError("method 1 needs -k, method 2 needs -l", EXIT_USAGE)
    rep = cryptanalysis.key_space_size(method, size_param, bounds, args.keys)
    print(f"size={rep.size}")
    print(f"log2={rep.log2:.4f}")
    return EXIT_OK


def cmd_stats(args) -> int:
    data = BitString.from_bytes(_read_input(args.input))
    if args.bits is not None:
        data = data[:args.bits]
    res = cryptanalysis.monobit_test(data)
    print(f"n={res.n} ones={res.ones} z={res.z:.4f} {'pass' if res.passed else 'fail'}")
    return EXIT_OK if res.passed else EXIT_ATTACK_FAILED


# -- parser ------------------------------------------------------------------

def _add_session_args(p):
    p.add_argument("--lib", help=f"library file (default ${LIBRARY_ENV})")
    p.add_argument("--variant", choices=sorted(VARIANTS), default="main")
    p.add_argument("--rule", choices=sorted(RULES), default="b")
    p.add_argument("--g-min", type=int)
    p.add_argument("--g-max", type=int)
    p.add_argument("--s", type=int, help="session length in bits (method 2 libraries)")
    p.add_argument("--combined", action="store_true", help="seal both keywords as one")
    p.add_argument("--allow-test-library", action="store_true")
    p.add_argument("--seed", type=int, help="seeded test mode (reproducible keys)")


def _add_transport_args(p):
    p.add_argument("--transport", choices=["null", "pad"], default="null")
    p.add_argument("--pad", help="pre-shared pad file for --transport pad")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mtpad", description="Multiple-time pad cipher tools.",
                                     epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("keygen-library", help="generate a basic-key library")
    p.add_argument("--method", type=int, choices=[1, 2], required=True)
    p.add_argument("-k", type=int)
    p.add_argument("-s", type=int)
    p.add_argument("-l", type=int)
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--seed", type=int, help="seeded test library (tagged as such)")
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=cmd_keygen_library)

    p = sub.add_parser("encrypt", help="encrypt a file into a frame")
    _add_session_args(p)
    _add_transport_args(p)
    p.add_argument("--policy", choices=sorted(POLICIES), default="truncate")
    p.add_argument("--in", dest="input", default="-")
    p.add_argument("--out", dest="output", default="-")
    p.set_defaults(func=cmd_encrypt)

    p = sub.add_parser("decrypt", help="decrypt a frame")
    p.add_argument("--lib")
    _add_transport_args(p)
    p.add_argument("--message-bits", type=int,
                   help="variant A, zero-pad: message length used to pick the candidate")
    p.add_argument("--in", dest="input", default="-")
    p.add_argument("--out", dest="output", default="-")
    p.set_defaults(func=cmd_decrypt)

    p = sub.add_parser("stream-encrypt", help="encrypt incrementally, frame written as it goes")
    _add_session_args(p)
    _add_transport_args(p)
    p.add_argument("--length", type=int, help="message size in bytes (required for stdin)")
    p.add_argument("--chunk-size", type=int, default=64 * 1024)
    p.add_argument("--in", dest="input", default="-")
    p.add_argument("--out", dest="output", default="-")
    p.set_defaults(func=cmd_stream_encrypt)

    p = sub.add_parser("stream-decrypt", help="decrypt incrementally as the frame arrives")
    p.add_argument("--lib")
    _add_transport_args(p)
    p.add_argument("--chunk-size", type=int, default=64 * 1024)
    p.add_argument("--in", dest="input", default="-")
    p.add_argument("--out", dest="output", default="-")
    p.set_defaults(func=cmd_stream_decrypt)

    p = sub.add_parser("attack", help="run a known-plaintext or brute-force attack")
    p.add_argument("attack_kind", choices=["known-plaintext", "brute-force", "simulate"])
    p.add_argument("frame", nargs="?", help="frame file ('-' for stdin)")
    p.add_argument("--lib")
    p.add_argument("--known", help="known plaintext bits: lines of '<position> <bit>', 1-indexed")
    p.add_argument("--variant", choices=sorted(VARIANTS))
    p.add_argument("--rule", choices=sorted(RULES))
    p.add_argument("--assume-basic", action="store_true",
                   help="model the ciphertext as P ^ K_P whatever the variant")
    p.add_argument("--max-keywords", type=int, default=1 << 20)
    p.add_argument("--out", dest="output")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("-k", type=int, default=32)
    p.add_argument("-s", type=int, default=256)
    p.add_argument("--known-bits", type=int, default=64)
    p.add_argument("--run", action="store_true", help="known bits form one consecutive block")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("keyspace", help="private key space size")
    p.add_argument("--method", type=int, choices=[1, 2], required=True)
    p.add_argument("-k", type=int)
    p.add_argument("-l", type=int)
    p.add_argument("--g", type=int, help="fixed g")
    p.add_argument("--g-min", type=int)
    p.add_argument("--g-max", type=int)
    p.add_argument("--keys", type=int, choices=[1, 2], default=1)
    p.set_defaults(func=cmd_keyspace)

    p = sub.add_parser("stats", help="monobit test of a file")
    p.add_argument("--in", dest="input", default="-")
    p.add_argument("--bits", type=int)
    p.set_defaults(func=cmd_stats)
    return parser


def dispatch(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "attack" and args.attack_kind != "simulate":
        if not args.frame or not args.known:
            parser.error("attack known-plaintext/brute-force need a frame and --known")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"mtpad: {exc}", file=sys.stderr)
        return exc.code
    except cryptanalysis.Infeasible as exc:
        print(f"mtpad: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (framing.FrameError, library.LibraryFormatError) as exc:
        print(f"mtpad: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except (KeyMaterialError, CipherError, LibraryError, framing.TransportError,
            EntropyExhausted) as exc:
        print(f"mtpad: {exc}", file=sys.stderr)
        return EXIT_KEY
    except OSError as exc:
        print(f"mtpad: {exc}", file=sys.stderr)
        return EXIT_IO


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
