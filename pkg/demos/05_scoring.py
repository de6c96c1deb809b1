"""WER, CER, and BLEU with their normalization pipeline.

Shows how the scorers treat case and punctuation, what the per-utterance
WER detail looks like, and how the BLEU signature pins the configuration
that produced a number.
"""

from stlab.metrics import bleu, cer, score_corpus, tokenize_13a, wer


def main() -> None:
    refs = ["The cat sat on the mat.", "Hello, World!", "a b c d"]
    hyps = ["the cat sat on a mat", "hello world", "a b x d"]

    print("normalization folds case and strips punctuation:")
    print(f"  WER = {wer(refs, hyps):.4f}")
    print(f"  WER (raw strings) = {wer(refs, hyps, normalize=False):.4f}")
    print(f"  CER = {cer(refs, hyps):.4f}")
    print(f"  BLEU = {bleu(refs, hyps):.2f}")

    print("\n13a tokenization handles punctuation and numbers:")
    for text in ("It's 3,000.5 meters!", "win 3-4, then rest."):
        print(f"  {text!r} -> {tokenize_13a(text)}")

    report = score_corpus(refs, hyps, "wer")
    print(f"\nsignature: {report.signature}")
    print("per-utterance detail:")
    for i, entry in enumerate(report.detail["per_utterance"]):
        print(f"  utterance {i}: {entry:.3f}")

    print("\nidentity and empty edge cases:")
    print(f"  BLEU(refs, refs) = {bleu(refs, refs)}")
    print(f"  BLEU(refs, empty) = {bleu(refs, [''] * len(refs))}")


if __name__ == "__main__":
    main()
