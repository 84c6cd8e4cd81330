from xml.etree import ElementTree as ET
import copy
import os
from functools import reduce

from lib.errors import ConfigError
from lib.log_setup import logger


class UserSettings:
    """XML backed tunables.

    The user file is layered over the defaults file: a missing or unreadable
    user file is recreated from the defaults, and keys added to the defaults
    later are copied into an existing user file on load.
    """

    def __init__(self, config="config/settings.xml", default_config="config/default_settings.xml"):
        self.cache = {}

        self.CONFIG_FILE = config
        self.DEFAULT_CONFIG_FILE = default_config
        self.pending_changes = False

        try:
            self.tree = ET.parse(self.CONFIG_FILE)
            self.root = self.tree.getroot()
            self.xml_to_dict(self.cache, self.root)
        except (OSError, ET.ParseError):
            logger.warning(f"Can't load settings file {self.CONFIG_FILE}, restoring defaults")
            self.reset_to_default()

        self.copy_missing()
        if self.pending_changes:
            self.save_changes()

    # get setting

    def __getitem__(self, key):
        if isinstance(key, str):
            return self.cache[key]
        elif hasattr(key, '__iter__'):
            # deep get
            return reduce(dict.__getitem__, key, self.cache)
        raise KeyError(key)

    def get(self, key, default=None):
        try:
            value = self.__getitem__(key)
        except (KeyError, TypeError):
            return default
        return default if value is None else value

    def get_str(self, key, default=None):
        value = self.get(key, default)
        return None if value is None else str(value).strip()

    def get_int(self, key, default=None):
        value = self.get(key, default)
        if value is None:
            return None
        try:
            return int(value)
        except ValueError:
            raise ConfigError(f"setting {self._path(key)} is not an integer: {value!r}")

    def get_float(self, key, default=None):
        value = self.get(key, default)
        if value is None:
            return None
        try:
            return float(value)
        except ValueError:
            raise ConfigError(f"setting {self._path(key)} is not a number: {value!r}")

    def get_float_list(self, key, default=None):
        value = self.get(key, default)
        if value is None:
            return None
        try:
            return [float(v) for v in str(value).split(",") if v.strip()]
        except ValueError:
            raise ConfigError(f"setting {self._path(key)} is not a comma separated number list: {value!r}")

    # set setting

    def __setitem__(self, key, value):
        text = str(value)
        self._xml_set(key, text)

        if isinstance(key, str):
            self.cache[key] = text
        else:
            parent = reduce(dict.__getitem__, key[:-1], self.cache)
            parent[key[-1]] = text

    def set(self, key, value):
        self.__setitem__(key, value)

    def flat(self):
        """Every leaf setting keyed by its slash separated path, in file order."""
        def walk(node, prefix):
            for tag, value in node.items():
                if isinstance(value, dict):
                    yield from walk(value, prefix + (tag,))
                else:
                    yield self._path(prefix + (tag,)), value
        return dict(walk(self.cache, ()))

    @staticmethod
    def _path(key):
        if isinstance(key, str):
            return key
        return '/'.join(key)

    def _xml_set(self, key, value):
        xpath = self._path(key)
        elem = self.root.find("./" + xpath)
        if elem is None or len(elem):
            raise ConfigError(f"no setting at {xpath}")
        elem.text = value
        self.pending_changes = True

    def save_changes(self):
        if not self.pending_changes:
            return
        self.pending_changes = False
        self.tree.write(self.CONFIG_FILE, encoding="UTF-8", xml_declaration=True)
        self.cache = {}
        self.xml_to_dict(self.cache, self.root)
        logger.debug(f"Saved settings to {self.CONFIG_FILE}")

    def reset_to_default(self):
        try:
            self.tree = ET.parse(self.DEFAULT_CONFIG_FILE)
        except (OSError, ET.ParseError) as error:
            raise ConfigError(f"Can't load default settings {self.DEFAULT_CONFIG_FILE}: {error}")

        directory = os.path.dirname(self.CONFIG_FILE)
        if directory:
            os.makedirs(directory, exist_ok=True)
        self.tree.write(self.CONFIG_FILE, encoding="UTF-8", xml_declaration=True)
        self.root = self.tree.getroot()
        self.cache = {}
        self.xml_to_dict(self.cache, self.root)

    @staticmethod
    def xml_to_dict(target, node):
        """Nested dict of a <tag>text</tag> tree; attributes are ignored."""
        for elem in node:
            if len(elem) == 0:
                target[elem.tag] = elem.text
            else:
                target[elem.tag] = {}
                UserSettings.xml_to_dict(target[elem.tag], elem)

    def copy_missing(self):
        """Add every element of the defaults file that the user file lacks."""
        try:
            defaults = ET.parse(self.DEFAULT_CONFIG_FILE).getroot()
        except (OSError, ET.ParseError) as error:
            raise ConfigError(f"Can't load default settings {self.DEFAULT_CONFIG_FILE}: {error}")

        def merge(default_node, user_node):
            for default_elem in default_node:
                user_elem = user_node.find(default_elem.tag)
                if user_elem is None:
                    user_node.append(copy.deepcopy(default_elem))
                    self.pending_changes = True
                elif len(default_elem):
                    merge(default_elem, user_elem)

        merge(defaults, self.root)
        if self.pending_changes:
            self.cache = {}
            self.xml_to_dict(self.cache, self.root)
