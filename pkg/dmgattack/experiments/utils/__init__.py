from . import ioutil
