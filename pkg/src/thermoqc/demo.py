import sys
import os.path
import argparse

from importlib import import_module
from importlib.resources import files


def available():
    return sorted(os.path.splitext(f.name)[0] for f in files('thermoqc.demos').iterdir()
                  if f.name.endswith('.py') and not f.name.startswith('__'))


def main():
    cmdline = argparse.ArgumentParser(description='thermoqc demo runner')
    cmdline.add_argument('cmd', type=str, nargs='?', default='ls', help='ls or demo name')
    opts = cmdline.parse_args(sys.argv[1:])

    match opts.cmd:
        case 'ls':
            print('Available demos:')
            for demo in available():
                print(f'    {demo}')

        case _:
            fullname = f'thermoqc.demos.{opts.cmd}'
            imp = import_module(fullname)
            fkt = getattr(imp, 'main')
            fkt()


if __name__ == '__main__':
    main()
