from .domain import (
    AddressBook,
    AddressBookEntry,
    PhoneDomain,
    PhoneStore,
    PlacedCall,
    PHONETYPES,
    PHONETYPE_SYNONYMS,
    TEMPLATES,
    default_address_book,
    default_corpus,
    default_domain,
)
from .scripted import ScriptedPhonePolicy

__all__ = [
    "AddressBook",
    "AddressBookEntry",
    "PhoneDomain",
    "PhoneStore",
    "PlacedCall",
    "PHONETYPES",
    "PHONETYPE_SYNONYMS",
    "TEMPLATES",
    "default_address_book",
    "default_corpus",
    "default_domain",
    "ScriptedPhonePolicy",
]
