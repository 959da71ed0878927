from enum import IntEnum, unique


@unique
class Token(IntEnum):
    HEADER = 1
    KEY = 2
    CATEGORY = 3
    NUMBER_INT = 4
    NUMBER_FLOAT = 5
    SUMMARY = 6
    KIND = 7
    WARNING = 8
