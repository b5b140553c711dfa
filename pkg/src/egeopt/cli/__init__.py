"""Command-line pipeline: synth, extract, train, enhance, analyze, gradcheck."""
