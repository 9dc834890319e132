"""Integer codes shared between the engine and the kernel backends."""

COMPPROB = 0
ENTROPY = 1
MAXPROB = 2
ENTCOMPPROB = 3
COMPLOGITS = 4
