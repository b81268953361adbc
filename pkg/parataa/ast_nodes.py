"""Syntax tree of a run-config file"""
from dataclasses import dataclass, field
from typing import Any, List, Optional


@dataclass
class Literal:
    value: Any
    line: int = 0
    column: int = 0


@dataclass
class ListValue:
    items: List[Any] = field(default_factory=list)
    line: int = 0
    column: int = 0

    @property
    def value(self):
        return [item.value for item in self.items]


@dataclass
class Entry:
    key: str
    value: Any
    line: int = 0
    column: int = 0


@dataclass
class Section:
    name: str
    entries: List[Entry] = field(default_factory=list)
    line: int = 0
    column: int = 0

    def get(self, key: str) -> Optional[Entry]:
        for entry in self.entries:
            if entry.key == key:
                return entry
        return None


@dataclass
class ConfigFile:
    sections: List[Section] = field(default_factory=list)
    filename: str = "<config>"

    def section(self, name: str) -> Optional[Section]:
        for section in self.sections:
            if section.name == name:
                return section
        return None
