"""Independent evaluation of the stream-seed derivation and the first uniforms.

Prints the regression constants frozen in tests/test_rng.cpp.
"""

M = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def mix64(z):
    z &= M
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & M
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & M
    return z ^ (z >> 31)


def derive(master, replicate, role, b=0, h=0, salt=0):
    acc = mix64(master + 0x6A09E667F3BCC909)
    for word in (replicate, role, b, h, salt):
        acc = mix64(acc ^ mix64(word + GOLDEN))
    return acc


def uniforms(seed, m):
    out, state = [], seed
    for _ in range(m):
        state = (state + GOLDEN) & M
        u = (mix64(state) >> 11) * 2.0**-53
        out.append(u if u > 0 else 2.0**-53)
    return out


if __name__ == "__main__":
    for master, rep in ((42, 0), (42, 1), (43, 0)):
        print(f"master={master} replicate={rep} OBSERVED: 0x{derive(master, rep, 1):016x}")
    print(f"master=42 BOOT(0,7): 0x{derive(42, 0, 2, 7):016x}")
    print(f"master=42 INNER(0,7,3): 0x{derive(42, 0, 3, 7, 3):016x}")
    s = derive(42, 0, 1)
    print("uniforms:", ", ".join(repr(u) for u in uniforms(s, 3)))
