"""Integer gate codes shared by both kernel backends."""

PAULI_X = 0
PAULI_Y = 1
PAULI_Z = 2
HADAMARD = 3
RX = 4
RY = 5
RZ = 6
XX = 7
YY = 8
ZZ = 9
SWAP = 10

TWO_QUBIT = (XX, YY, ZZ, SWAP)
PARAMETRIC = (RX, RY, RZ, XX, YY, ZZ)

# measurement axis codes
AXIS_X = 0
AXIS_Y = 1
AXIS_Z = 2
