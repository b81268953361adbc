"""Parser for run-config files"""
from typing import List

from .ast_nodes import ConfigFile, Entry, ListValue, Literal, Section
from .errors import ConfigSyntaxError
from .lexer import Lexer
from .tokens import Token, TokenType

VALUE_TOKENS = (TokenType.NUMBER, TokenType.STRING, TokenType.BOOLEAN, TokenType.IDENTIFIER)


class Parser:
    def __init__(self, tokens: List[Token], filename="<config>"):
        self.tokens = tokens
        self.pos = 0
        self.filename = filename

    @property
    def current(self) -> Token:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else self.tokens[-1]

    def advance(self) -> Token:
        token = self.current
        if self.pos < len(self.tokens) - 1:
            self.pos += 1
        return token

    def match(self, *types) -> bool:
        return self.current.type in types

    def error(self, msg, token=None):
        token = token or self.current
        return ConfigSyntaxError(f"{self.filename}: {msg}", token.line, token.column)

    def consume(self, tt, msg=""):
        if self.current.type == tt:
            return self.advance()
        raise self.error(msg or f"expected {tt.name.lower()}")

    def end_of_line(self):
        if self.match(TokenType.EOF):
            return
        self.consume(TokenType.NEWLINE, "expected end of line")

    def parse(self) -> ConfigFile:
        config = ConfigFile(filename=self.filename)
        while self.match(TokenType.NEWLINE):
            self.advance()
        while not self.match(TokenType.EOF):
            if self.match(TokenType.LBRACKET):
                config.sections.append(self.parse_header())
            elif self.match(TokenType.IDENTIFIER):
                if not config.sections:
                    raise self.error(f"entry '{self.current.value}' appears before any [section]")
                config.sections[-1].entries.append(self.parse_entry())
            else:
                raise self.error(f"unexpected {self.current.type.name.lower()}")
        return config

    def parse_header(self) -> Section:
        start = self.consume(TokenType.LBRACKET)
        name = self.consume(TokenType.IDENTIFIER, "expected section name").value
        self.consume(TokenType.RBRACKET, "expected ']' after section name")
        self.end_of_line()
        return Section(name=name, line=start.line, column=start.column)

    def parse_entry(self) -> Entry:
        key = self.advance()
        self.consume(TokenType.ASSIGN, f"expected '=' after '{key.value}'")
        value = self.parse_value()
        self.end_of_line()
        return Entry(key=key.value, value=value, line=key.line, column=key.column)

    def parse_value(self):
        if self.match(*VALUE_TOKENS):
            token = self.advance()
            return Literal(token.value, token.line, token.column)
        if self.match(TokenType.LBRACKET):
            return self.parse_list()
        raise self.error("expected a value")

    def parse_list(self) -> ListValue:
        start = self.consume(TokenType.LBRACKET)
        items = []
        while not self.match(TokenType.RBRACKET):
            # the lexer only emits a NEWLINE inside brackets at end of input
            if self.match(TokenType.EOF, TokenType.NEWLINE):
                raise self.error("unterminated list", start)
            items.append(self.parse_value())
            if self.match(TokenType.EOF, TokenType.NEWLINE):
                raise self.error("unterminated list", start)
            if not self.match(TokenType.RBRACKET):
                self.consume(TokenType.COMMA, "expected ',' or ']' in list")
        self.consume(TokenType.RBRACKET)
        return ListValue(items=items, line=start.line, column=start.column)


def parse(source: str, filename: str = "<config>") -> ConfigFile:
    tokens = Lexer(source, filename).tokenize()
    return Parser(tokens, filename).parse()
