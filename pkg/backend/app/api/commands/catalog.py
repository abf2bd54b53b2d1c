import argparse
import json

from app.api.commands import EXIT_OK
from app.services.catalog_service import catalog_listing


def register(subparsers) -> None:
    parser = subparsers.add_parser("catalog", help="List catalog surfaces")
    parser.add_argument("--json", action="store_true", help="Machine-readable listing")
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> int:
    listing = catalog_listing()
    if args.json:
        print(json.dumps(listing, indent=2))
        return EXIT_OK
    for entry in listing:
        params = ", ".join(entry["parameters"]) or "-"
        print(f"{entry['name']:<28} n={entry['codimension']}  frame={entry['frame']:<8} params: {params}")
        print(f"    {entry['description']}")
    return EXIT_OK
