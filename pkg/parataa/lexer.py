"""Lexer/Tokenizer for run-config files"""
from typing import List, Optional

from .errors import ConfigSyntaxError
from .tokens import KEYWORDS, SYMBOLS, Token, TokenType


class Lexer:
    def __init__(self, source: str, filename: str = "<config>"):
        self.source = source
        self.filename = filename
        self.pos = 0
        self.line = 1
        self.column = 1
        self.depth = 0

    @property
    def current(self) -> Optional[str]:
        return self.source[self.pos] if self.pos < len(self.source) else None

    def peek(self, n=1) -> Optional[str]:
        pos = self.pos + n
        return self.source[pos] if pos < len(self.source) else None

    def advance(self) -> str:
        char = self.current
        self.pos += 1
        if char == "\n":
            self.line += 1
            self.column = 1
        else:
            self.column += 1
        return char

    def error(self, message, line=None, column=None):
        return ConfigSyntaxError(f"{self.filename}: {message}",
                                 line or self.line, column or self.column)

    def skip_whitespace(self):
        while self.current and self.current in " \t\r":
            self.advance()

    def skip_comment(self):
        while self.current and self.current != "\n":
            self.advance()

    def read_string(self) -> Token:
        line, col = self.line, self.column
        self.advance()
        value = ""
        while self.current != '"':
            if self.current is None or self.current == "\n":
                raise self.error("unterminated string", line, col)
            if self.current == "\\":
                self.advance()
                escapes = {"n": "\n", "t": "\t", "\\": "\\", '"': '"'}
                if self.current not in escapes:
                    raise self.error(f"unknown escape sequence \\{self.current}")
                value += escapes[self.current]
            else:
                value += self.current
            self.advance()
        self.advance()
        return Token(TokenType.STRING, value, line, col, self.column - col)

    def read_number(self) -> Token:
        line, col = self.line, self.column
        text = ""
        if self.current in "+-":
            text += self.advance()
        while self.current and self.current.isdigit():
            text += self.advance()
        is_float = False
        if self.current == ".":
            is_float = True
            text += self.advance()
            while self.current and self.current.isdigit():
                text += self.advance()
        if self.current and self.current in "eE":
            is_float = True
            text += self.advance()
            if self.current and self.current in "+-":
                text += self.advance()
            if not (self.current and self.current.isdigit()):
                raise self.error(f"malformed number {text!r}", line, col)
            while self.current and self.current.isdigit():
                text += self.advance()
        try:
            value = float(text) if is_float else int(text)
        except ValueError:
            raise self.error(f"malformed number {text!r}", line, col)
        return Token(TokenType.NUMBER, value, line, col, len(text))

    def read_identifier(self) -> Token:
        line, col = self.line, self.column
        value = ""
        while self.current and (self.current.isalnum() or self.current in "_-"):
            value += self.advance()
        if value in KEYWORDS:
            return Token(TokenType.BOOLEAN, KEYWORDS[value], line, col, len(value))
        return Token(TokenType.IDENTIFIER, value, line, col, len(value))

    def read_symbol(self) -> Token:
        line, col = self.line, self.column
        c = self.current
        if c not in SYMBOLS:
            raise self.error(f"unknown character {c!r}")
        self.advance()
        if c == "[":
            self.depth += 1
        elif c == "]":
            self.depth = max(0, self.depth - 1)
        return Token(SYMBOLS[c], c, line, col)

    def starts_number(self) -> bool:
        c = self.current
        if c.isdigit():
            return True
        nxt = self.peek() or ""
        if c in "+-":
            return nxt.isdigit() or (nxt == "." and (self.peek(2) or "").isdigit())
        return c == "." and nxt.isdigit()

    def tokenize(self) -> List[Token]:
        tokens = []
        while self.current:
            self.skip_whitespace()
            if not self.current:
                break
            if self.current == "#":
                self.skip_comment()
                continue
            if self.current == "\n":
                line, col = self.line, self.column
                self.advance()
                # newlines inside brackets continue the value
                if self.depth == 0 and tokens and tokens[-1].type != TokenType.NEWLINE:
                    tokens.append(Token(TokenType.NEWLINE, "\n", line, col))
                continue
            if self.current == '"':
                tokens.append(self.read_string())
            elif self.starts_number():
                tokens.append(self.read_number())
            elif self.current.isalpha() or self.current == "_":
                tokens.append(self.read_identifier())
            else:
                tokens.append(self.read_symbol())
        if tokens and tokens[-1].type != TokenType.NEWLINE:
            tokens.append(Token(TokenType.NEWLINE, "\n", self.line, self.column))
        tokens.append(Token(TokenType.EOF, None, self.line, self.column))
        return tokens
