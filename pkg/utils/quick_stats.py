#!/usr/bin/env python3
"""
Quick Stats CLI
Console diagnostics for a lexical-sample corpus with rich formatting.

Usage:
    python utils/quick_stats.py                          # Use WSD_TRAIN_PATH from .env
    python utils/quick_stats.py --train data/train.xml   # Analyze a specific file
    python utils/quick_stats.py --key data/test.key      # Add an answer key
    python utils/quick_stats.py --synthetic              # Inspect the generated corpus
    python utils/quick_stats.py --top 15                 # Show more lexelts
"""

import argparse
import sys
from collections import Counter
from pathlib import Path

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent.parent))

import pandas as pd
from rich import box
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from src.config import Config
from src.corpus import build_vocab, inventory_stats, parse_lexical_sample
from src.synthetic import generate_corpus

console = Console()

POS_NAMES = {"n": "Nouns", "v": "Verbs", "a": "Adjectives", "total": "Total"}


def load_corpus(train_path: str = None, key_path: str = None, synthetic: bool = False):
    """Load instances from a lexical-sample file or generate the synthetic corpus."""
    if synthetic:
        console.print("[cyan]Generating synthetic corpus...[/cyan]")
        corpus = generate_corpus()
        return corpus.inventory, corpus.instances

    path = train_path or Config.TRAIN_PATH
    if not path or not Path(path).exists():
        console.print("[red]No lexical-sample file. Pass --train or set WSD_TRAIN_PATH.[/red]")
        return None, []

    console.print(f"[dim]Loading from: {path}[/dim]")
    return parse_lexical_sample(path, key_path=key_path, verbose=False)


def share_bar(share: float, width: int = 20) -> str:
    filled = int(share * width)
    return "█" * filled + "░" * (width - filled)


def print_overview(inventory, instances):
    vocab = build_vocab(instances)
    labeled = sum(1 for inst in instances if inst.gold)
    multi = sum(1 for inst in instances if len(inst.gold) > 1)
    lengths = pd.Series([len(inst.left_tokens) + len(inst.right_tokens) for inst in instances])

    overview = Table.grid(padding=(0, 2))
    overview.add_column(style="bold")
    overview.add_column()
    overview.add_row("Instances", f"[bold cyan]{len(instances):,}[/bold cyan]")
    overview.add_row("Labeled", f"{labeled:,} ({multi} with several gold senses)")
    overview.add_row("Lexelts", str(len(inventory.lexelts)))
    overview.add_row("Senses", str(len(inventory)))
    overview.add_row("Vocabulary", f"{len(vocab) - 1:,} tokens (+ PAD)")
    overview.add_row("Context length", f"median {lengths.median():.0f}, max {lengths.max()}")

    console.print(Panel(overview, title="[bold]Overview[/bold]", border_style="blue"))


def print_pos_summary(inventory):
    """Words and average candidate senses per part of speech."""
    stats = inventory_stats(inventory)
    table = Table(title="Senses per part of speech", box=box.ROUNDED)
    table.add_column("Class", style="cyan")
    table.add_column("Words", justify="right")
    table.add_column("Average senses", justify="right")
    for pos, row in stats.iterrows():
        style = "bold" if pos == "total" else ""
        name = POS_NAMES.get(pos, pos)
        table.add_row(f"[{style}]{name}[/{style}]" if style else name, str(int(row["words"])), f"{row['avg_senses']:.2f}")
    console.print(table)


def print_lexelt_table(inventory, instances, top: int = 10):
    """Most frequent lexelts with their majority-sense share."""
    by_lexelt = Counter(inst.lexelt for inst in instances)
    table = Table(title=f"Top {top} lexelts by instance count", box=box.ROUNDED)
    table.add_column("Lexelt", style="cyan")
    table.add_column("Instances", justify="right")
    table.add_column("Senses", justify="right")
    table.add_column("Majority sense", justify="right")
    table.add_column("", justify="left")

    for lexelt, count in by_lexelt.most_common(top):
        senses = Counter(s for inst in instances if inst.lexelt == lexelt for s in inst.gold)
        share = senses.most_common(1)[0][1] / count if senses else 0.0
        color = "green" if share < 0.5 else "yellow" if share < 0.8 else "red"
        table.add_row(
            lexelt,
            str(count),
            str(len(inventory.senses(lexelt))) if lexelt in inventory else "-",
            f"[{color}]{100 * share:.0f}%[/{color}]",
            share_bar(share),
        )
    console.print(table)


def main():
    parser = argparse.ArgumentParser(description="Quick stats for a lexical-sample corpus")
    parser.add_argument("--train", type=str, help="Lexical-sample markup file")
    parser.add_argument("--key", type=str, help="Optional answer key")
    parser.add_argument("--synthetic", action="store_true", help="Inspect the generated synthetic corpus")
    parser.add_argument("--top", type=int, default=10, help="Number of lexelts to list")
    args = parser.parse_args()

    console.print("\n[bold blue]═══════════════════════════════════════════════════[/bold blue]")
    console.print("[bold]         Lexical Sample Corpus Console[/bold]")
    console.print("[bold blue]═══════════════════════════════════════════════════[/bold blue]\n")

    inventory, instances = load_corpus(args.train, args.key, args.synthetic)
    if not instances:
        return

    print_overview(inventory, instances)
    console.print()
    print_pos_summary(inventory)
    console.print()
    print_lexelt_table(inventory, instances, top=args.top)

    console.print("\n[dim]Run with --help for more options[/dim]\n")


if __name__ == "__main__":
    main()
