#!/usr/bin/env python3
"""Tabulate bonding-curve economics: dilution and the early-adopter payoff.

Simulates a line of buyers each offering the same ether, then unwinds the
positions in entry order, printing what each mints, what a exit would
return at that point, and the realized gain or loss.
"""

import argparse

from copyrightly.tokenomics import burn_return, mint_charge, mintable


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--buyers", type=int, default=8)
    parser.add_argument("--eth", type=int, default=5 * 10**17,
                        help="identical offer per buyer, in wei")
    parser.add_argument("--num", type=int, default=1, help="slope numerator")
    parser.add_argument("--den", type=int, default=10**18, help="slope denominator")
    args = parser.parse_args()

    supply = 0
    positions = []
    print(f"slope {args.num}/{args.den}, offer {args.eth} wei per buyer")
    print(f"{'buyer':>5} {'minted':>26} {'charged':>24}")
    for i in range(args.buyers):
        minted = mintable(args.num, args.den, supply, args.eth)
        charged = mint_charge(args.num, args.den, supply, minted)
        supply += minted
        positions.append((minted, charged))
        print(f"{i:>5} {minted:>26} {charged:>24}")

    print(f"\nunwind in entry order (supply starts at {supply}):")
    print(f"{'buyer':>5} {'returned':>24} {'gain':>24}")
    for i, (minted, charged) in enumerate(positions):
        returned = burn_return(args.num, args.den, supply, minted)
        supply -= minted
        print(f"{i:>5} {returned:>24} {returned - charged:>+24}")


if __name__ == "__main__":
    main()
